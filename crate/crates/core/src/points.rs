//! Validated point configurations and their on-disk format.
//!
//! File layout (UTF-8, LF line endings):
//! ```text
//! N <count>
//! domain <ball cx cy cz r | cube cx cy cz side>
//! sep <min-separation>
//! <x> <y> <z>        (count lines, 17-significant-digit decimals)
//! ```

use crate::domain::DomainO;
use crate::error::{Error, Result};
use crate::tensor::V3;
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

#[derive(Clone, Debug)]
pub struct PointConfiguration {
    points: Vec<V3>,
    domain: DomainO,
    declared_separation: f64,
}

impl PointConfiguration {
    /// Validates containment in the domain and the declared minimum
    /// separation (cell-list search, exact for the >= decision).
    pub fn new(points: Vec<V3>, domain: DomainO, declared_separation: f64) -> Result<Self> {
        if !(declared_separation.is_finite() && declared_separation >= 0.0) {
            return Err(Error::validation("separation must be finite and >= 0"));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::validation(format!("point {i} is not finite")));
            }
            if !domain.contains(p) {
                return Err(Error::validation(format!(
                    "point {i} lies outside the domain"
                )));
            }
        }
        if declared_separation > 0.0 && !separation_holds(&points, declared_separation) {
            return Err(Error::validation(
                "a point pair violates the declared separation",
            ));
        }
        Ok(PointConfiguration {
            points,
            domain,
            declared_separation,
        })
    }

    pub fn points(&self) -> &[V3] {
        &self.points
    }

    pub fn domain(&self) -> &DomainO {
        &self.domain
    }

    pub fn declared_separation(&self) -> f64 {
        self.declared_separation
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Exact minimum pairwise distance (O(n^2); intended for tests and small n).
    pub fn min_distance(&self) -> Option<f64> {
        let n = self.points.len();
        if n < 2 {
            return None;
        }
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.min((self.points[i] - self.points[j]).norm());
            }
        }
        Some(best)
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write(&mut f)
    }

    pub fn write(&self, w: &mut impl Write) -> Result<()> {
        write!(w, "N {}\n", self.points.len())?;
        match &self.domain {
            DomainO::Ball { center, radius } => write!(
                w,
                "domain ball {:.16e} {:.16e} {:.16e} {:.16e}\n",
                center.x, center.y, center.z, radius
            )?,
            DomainO::Cube { center, side } => write!(
                w,
                "domain cube {:.16e} {:.16e} {:.16e} {:.16e}\n",
                center.x, center.y, center.z, side
            )?,
        }
        write!(w, "sep {:.16e}\n", self.declared_separation)?;
        for p in &self.points {
            write!(w, "{:.16e} {:.16e} {:.16e}\n", p.x, p.y, p.z)?;
        }
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read(f)
    }

    pub fn read(r: impl Read) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Parse("unexpected end of file".into()))?
                .map_err(Error::from)
        };

        let header = next_line()?;
        let n: usize = header
            .strip_prefix("N ")
            .ok_or_else(|| Error::Parse("expected 'N <count>'".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad count: {e}")))?;

        let dom_line = next_line()?;
        let toks: Vec<&str> = dom_line.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "domain" {
            return Err(Error::Parse("expected 'domain <kind> <4 params>'".into()));
        }
        let nums: Vec<f64> = toks[2..]
            .iter()
            .map(|t| t.parse().map_err(|e| Error::Parse(format!("bad float: {e}"))))
            .collect::<Result<_>>()?;
        let center = V3::new(nums[0], nums[1], nums[2]);
        let domain = match toks[1] {
            "ball" => DomainO::ball(center, nums[3])?,
            "cube" => DomainO::cube(center, nums[3])?,
            other => return Err(Error::Parse(format!("unknown domain kind '{other}'"))),
        };

        let sep_line = next_line()?;
        let sep: f64 = sep_line
            .strip_prefix("sep ")
            .ok_or_else(|| Error::Parse("expected 'sep <value>'".into()))?
            .trim()
            .parse()
            .map_err(|e| Error::Parse(format!("bad separation: {e}")))?;

        let mut points = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next_line()?;
            let xyz: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|e| Error::Parse(format!("bad float: {e}"))))
                .collect::<Result<_>>()?;
            if xyz.len() != 3 {
                return Err(Error::Parse("expected three coordinates per line".into()));
            }
            points.push(V3::new(xyz[0], xyz[1], xyz[2]));
        }
        Self::new(points, domain, sep)
    }
}

/// Cell-list check that all pairwise distances are >= sep.
pub fn separation_holds(points: &[V3], sep: f64) -> bool {
    if points.len() < 2 {
        return true;
    }
    let key = |p: &V3| -> (i64, i64, i64) {
        (
            (p.x / sep).floor() as i64,
            (p.y / sep).floor() as i64,
            (p.z / sep).floor() as i64,
        )
    };
    let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, p) in points.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let sep2 = sep * sep;
    for (i, p) in points.iter().enumerate() {
        let (cx, cy, cz) = key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        for &j in ids {
                            if j != i && (points[j] - p).norm_squared() < sep2 {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}
