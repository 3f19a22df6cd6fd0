//! Batch front-end for the effective-viscosity library: point-cloud
//! generation, V_N evaluation, periodic and random limits, lattice
//! constants, convergence sweeps and renormalization self-checks.
//!
//! Exit codes: 0 success, 2 validation, 3 accuracy failure, 4 I/O or parse.

use clap::{Args, Parser, Subcommand};
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use nu2_core::domain::DomainO;
use nu2_core::error::{Error, Result};
use nu2_core::ewald::{self, CellSpec, EwaldParams};
use nu2_core::points::PointConfiguration;
use nu2_core::processes::{self, ProcessSpec, ProcessVariant};
use nu2_core::randlimit;
use nu2_core::renorm;
use nu2_core::tensor::{M3, StrainMatrix, V3};
use nu2_core::vn;

#[derive(Parser)]
#[command(
    name = "nu2",
    about = "Second-order correction to the effective viscosity of dilute sphere suspensions",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a point configuration (lattice or Matern thinning) and write it to a file.
    Gen(GenArgs),
    /// Evaluate the finite-N functional V_N for a point-configuration file.
    Vn(VnArgs),
    /// Exact periodic limit of V_N for a cubic cell with a basis.
    LimitPeriodic(LimitPeriodicArgs),
    /// Constants of the simple-cubic lattice sums (a, alpha, beta, c1, c2).
    CubicConstants(CubicConstantsArgs),
    /// Monte-Carlo limit of V_N for a stationary hard-core process.
    LimitRandom(LimitRandomArgs),
    /// Sweep of V_N on rescaled cubic lattices against the periodic limit.
    Convergence(ConvergenceArgs),
    /// Renormalized-energy identity checks (surface pairing, smoothing tensor).
    RenormCheck(RenormCheckArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Cubic lattice: key=value tokens L=<cell> M=<basis size; 1, 2 (bcc) or 4 (fcc)>
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    lattice: Option<Vec<String>>,
    /// Matern I thinning: tokens lambda=<intensity> c=<hard core>
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    matern1: Option<Vec<String>>,
    /// Matern II thinning: tokens lambda=<intensity> c=<hard core>
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    matern2: Option<Vec<String>>,
    /// Explicit lattice basis offsets "x,y,z;x,y,z;..." (overrides M)
    #[arg(long)]
    basis: Option<String>,
    /// Side of the sampling window K_W (centered cube)
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output point-configuration file
    #[arg(long)]
    out: Option<PathBuf>,
    /// key=value defaults file; explicit flags override it
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VnArgs {
    /// Point-configuration file (as written by `gen`)
    #[arg(long)]
    points: Option<PathBuf>,
    /// Strain: "diag:a,b,c", six upper-triangle entries, or nine row-major entries
    #[arg(long)]
    strain: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LimitPeriodicArgs {
    /// Cell side
    #[arg(long = "L")]
    l: Option<f64>,
    /// Basis offsets "x,y,z"; repeat the flag or separate triples with ';'
    #[arg(long, action = clap::ArgAction::Append)]
    basis: Vec<String>,
    #[arg(long)]
    strain: Option<String>,
    /// Ewald splitting parameter (unit-cell units, in [0.2, 0.5])
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CubicConstantsArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LimitRandomArgs {
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    lattice: Option<Vec<String>>,
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    matern1: Option<Vec<String>>,
    #[arg(long, num_args = 1.., value_name = "KEY=VALUE")]
    matern2: Option<Vec<String>>,
    /// Torus-size ladder, e.g. "5,7,9"; the largest entry is reported
    #[arg(long = "l-ladder")]
    l_ladder: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strain: Option<String>,
    /// Write the per-L ladder as CSV to this path
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergenceArgs {
    /// Rescaling parameters, e.g. "0.1,0.05"; N grows like 1/eps^3
    #[arg(long)]
    epsilons: Option<String>,
    #[arg(long)]
    strain: Option<String>,
    /// Write the table to this path instead of stdout
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RenormCheckArgs {
    #[arg(long)]
    strain: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Degenerate(_) | Error::SingularPoint => 2,
        Error::Accuracy(_) => 3,
        Error::Parse(_) | Error::Io(_) => 4,
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Ok(v) = std::env::var("NU2_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::validation("NU2_THREADS must be a positive integer"))?;
        nu2_core::set_thread_count(n)?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Vn(a) => cmd_vn(a),
        Command::LimitPeriodic(a) => cmd_limit_periodic(a),
        Command::CubicConstants(a) => cmd_cubic_constants(a),
        Command::LimitRandom(a) => cmd_limit_random(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::RenormCheck(a) => cmd_renorm_check(a),
    }
}

// ---------------------------------------------------------------- helpers

/// Optional key=value defaults file ('#' starts a comment). Explicit flags
/// always win; the file only fills fields left unset.
struct FileCfg(HashMap<String, String>);

impl FileCfg {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        let mut map = HashMap::new();
        if let Some(p) = path {
            let text = std::fs::read_to_string(p)?;
            for (ln, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| {
                    Error::Parse(format!("config line {}: expected key=value", ln + 1))
                })?;
                map.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(FileCfg(map))
    }

    fn f64(&self, cur: Option<f64>, key: &str) -> Result<Option<f64>> {
        merge(cur, self.0.get(key), key)
    }
    fn u64(&self, cur: Option<u64>, key: &str) -> Result<Option<u64>> {
        merge(cur, self.0.get(key), key)
    }
    fn usize(&self, cur: Option<usize>, key: &str) -> Result<Option<usize>> {
        merge(cur, self.0.get(key), key)
    }
    fn string(&self, cur: Option<String>, key: &str) -> Option<String> {
        cur.or_else(|| self.0.get(key).cloned())
    }
    fn path(&self, cur: Option<PathBuf>, key: &str) -> Option<PathBuf> {
        cur.or_else(|| self.0.get(key).map(PathBuf::from))
    }
}

fn merge<T: std::str::FromStr>(
    cur: Option<T>,
    fallback: Option<&String>,
    key: &str,
) -> Result<Option<T>> {
    match (cur, fallback) {
        (Some(v), _) => Ok(Some(v)),
        (None, Some(s)) => s
            .parse()
            .map(Some)
            .map_err(|_| Error::Parse(format!("config key `{key}`: cannot parse `{s}`"))),
        (None, None) => Ok(None),
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::validation(format!("missing required --{flag}")))
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::validation(format!("cannot parse `{t}` as a number")))
        })
        .collect()
}

fn parse_strain(spec: &str) -> Result<StrainMatrix> {
    if let Some(rest) = spec.strip_prefix("diag:") {
        let v = parse_f64_list(rest)?;
        if v.len() != 3 {
            return Err(Error::validation("diag strain needs exactly 3 entries"));
        }
        return Ok(StrainMatrix::from_diag(v[0], v[1], v[2]));
    }
    let v = parse_f64_list(spec)?;
    match v.len() {
        6 => Ok(StrainMatrix::from_upper(v[0], v[1], v[2], v[3], v[4], v[5])),
        9 => {
            let m = M3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
            if (m - m.transpose()).norm() > 1e-12 * m.norm().max(1.0) {
                return Err(Error::validation("strain matrix is not symmetric"));
            }
            Ok(StrainMatrix::project(&m))
        }
        n => Err(Error::validation(format!(
            "strain needs 3 (diag:), 6 or 9 entries, got {n}"
        ))),
    }
}

fn parse_triples(specs: &[String]) -> Result<Vec<V3>> {
    let mut out = Vec::new();
    for spec in specs {
        for part in spec.split(';') {
            let v = parse_f64_list(part)?;
            if v.len() != 3 {
                return Err(Error::validation(format!(
                    "point `{part}` needs exactly 3 coordinates"
                )));
            }
            out.push(V3::new(v[0], v[1], v[2]));
        }
    }
    Ok(out)
}

fn kv_tokens(tokens: &[String]) -> Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("expected key=value, got `{t}`")))?;
        let x: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::validation(format!("field `{k}`: cannot parse `{v}`")))?;
        map.insert(k.trim().to_string(), x);
    }
    Ok(map)
}

fn kv_get(map: &HashMap<String, f64>, key: &str) -> Result<f64> {
    map.get(key)
        .copied()
        .ok_or_else(|| Error::validation(format!("missing field `{key}`")))
}

fn standard_basis(l: f64, m: usize) -> Result<Vec<V3>> {
    let h = l / 2.0;
    match m {
        1 => Ok(vec![V3::zeros()]),
        2 => Ok(vec![V3::zeros(), V3::new(h, h, h)]),
        4 => Ok(vec![
            V3::zeros(),
            V3::new(0.0, h, h),
            V3::new(h, 0.0, h),
            V3::new(h, h, 0.0),
        ]),
        _ => Err(Error::validation(
            "field `M`: only 1, 2 (bcc) or 4 (fcc) have a standard basis; pass --basis",
        )),
    }
}

fn build_variant(
    lattice: &Option<Vec<String>>,
    matern1: &Option<Vec<String>>,
    matern2: &Option<Vec<String>>,
    basis: &Option<String>,
) -> Result<ProcessVariant> {
    let picked = [lattice.is_some(), matern1.is_some(), matern2.is_some()]
        .iter()
        .filter(|b| **b)
        .count();
    if picked != 1 {
        return Err(Error::validation(
            "pick exactly one of --lattice, --matern1, --matern2",
        ));
    }
    if let Some(tokens) = lattice {
        let kv = kv_tokens(tokens)?;
        let l = kv_get(&kv, "L")?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::validation("field `L` must be positive"));
        }
        let basis_points = if let Some(b) = basis {
            let pts = parse_triples(std::slice::from_ref(b))?;
            if let Some(&m) = kv.get("M") {
                if m as usize != pts.len() {
                    return Err(Error::validation("field `M` disagrees with --basis"));
                }
            }
            pts
        } else {
            standard_basis(l, kv.get("M").copied().unwrap_or(1.0) as usize)?
        };
        return Ok(ProcessVariant::Lattice {
            l,
            basis: basis_points,
        });
    }
    let (tokens, second) = if let Some(t) = matern1 {
        (t, false)
    } else {
        (matern2.as_ref().unwrap(), true)
    };
    let kv = kv_tokens(tokens)?;
    let lambda = kv_get(&kv, "lambda")?;
    let c = kv_get(&kv, "c")?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::validation("field `lambda` must be positive"));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::validation("field `c` must be positive"));
    }
    Ok(if second {
        ProcessVariant::MaternII { lambda, c }
    } else {
        ProcessVariant::MaternI { lambda, c }
    })
}

fn ewald_params(sigma: Option<f64>) -> Result<EwaldParams> {
    match sigma {
        Some(s) => EwaldParams::with_sigma(s, 1e-12),
        None => Ok(EwaldParams::accurate()),
    }
}

/// 17 significant digits; enough to round-trip an f64.
fn fnum(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_object(fields: &[(&str, String)]) -> String {
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("\"{k}\": {v}"))
        .collect();
    format!("{{{}}}", body.join(", "))
}

fn emit_csv(path: Option<&PathBuf>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            let mut f = std::fs::File::create(p)?;
            f.write_all(content.as_bytes())?;
            Ok(())
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

// ---------------------------------------------------------------- commands

fn cmd_gen(a: GenArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let window = required(cfg.f64(a.window, "window")?, "window")?;
    let seed = cfg.u64(a.seed, "seed")?.unwrap_or(0);
    let out = required(cfg.path(a.out, "out"), "out")?;
    let variant = build_variant(&a.lattice, &a.matern1, &a.matern2, &a.basis)?;
    let spec = ProcessSpec {
        variant,
        window,
        seed,
    };
    let points = processes::generate(&spec)?;
    points.write_to(&out)?;
    println!(
        "{}",
        json_object(&[
            ("N", points.len().to_string()),
            ("window", fnum(window)),
            ("seed", seed.to_string()),
        ])
    );
    Ok(())
}

fn sorted_config(cfg: &PointConfiguration) -> Result<PointConfiguration> {
    let mut pts = cfg.points().to_vec();
    pts.sort_by(|a, b| {
        (a.x, a.y, a.z)
            .partial_cmp(&(b.x, b.y, b.z))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    PointConfiguration::new(pts, *cfg.domain(), cfg.declared_separation())
}

fn cmd_vn(a: VnArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let points_path = required(cfg.path(a.points, "points"), "points")?;
    let strain = parse_strain(&required(cfg.string(a.strain, "strain"), "strain")?)?;
    // sort so that permutations of the input file give identical output bytes
    let points = sorted_config(&PointConfiguration::read_from(&points_path)?)?;
    let breakdown = vn::eval_vn(&points, points.domain(), &strain)?;
    println!(
        "{}",
        json_object(&[
            ("N", breakdown.n.to_string()),
            ("pair_sum", fnum(breakdown.pair_sum)),
            ("background", fnum(breakdown.background)),
            ("V_N", fnum(breakdown.value)),
        ])
    );
    Ok(())
}

fn cmd_limit_periodic(a: LimitPeriodicArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let l = required(cfg.f64(a.l, "L")?, "L")?;
    let strain = parse_strain(&required(cfg.string(a.strain, "strain"), "strain")?)?;
    let basis_specs = if a.basis.is_empty() {
        vec![required(cfg.string(None, "basis"), "basis")?]
    } else {
        a.basis
    };
    let basis = parse_triples(&basis_specs)?;
    let params = ewald_params(cfg.f64(a.sigma, "sigma")?)?;
    let cell = CellSpec::new(l, basis)?;
    let value = ewald::limit_periodic(&cell, &strain, &params)?;
    println!(
        "{}",
        json_object(&[
            ("L", fnum(l)),
            ("M", cell.basis.len().to_string()),
            ("limit", fnum(value)),
        ])
    );
    Ok(())
}

fn cmd_cubic_constants(a: CubicConstantsArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let params = ewald_params(cfg.f64(a.sigma, "sigma")?)?;
    let c = ewald::cubic_constants(&params)?;
    println!(
        "{}",
        json_object(&[
            ("a", fnum(c.a)),
            ("alpha", fnum(c.alpha)),
            ("beta", fnum(c.beta)),
            ("c1", fnum(c.c1)),
            ("c2", fnum(c.c2)),
            ("fit_residual", fnum(c.fit_residual)),
        ])
    );
    Ok(())
}

fn cmd_limit_random(a: LimitRandomArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let strain = parse_strain(&required(cfg.string(a.strain, "strain"), "strain")?)?;
    let ladder_spec = required(cfg.string(a.l_ladder, "l-ladder"), "l-ladder")?;
    let l_ladder = parse_f64_list(&ladder_spec)?;
    let replicates = required(cfg.usize(a.replicates, "replicates")?, "replicates")?;
    let seed = cfg.u64(a.seed, "seed")?.unwrap_or(0);
    let params = ewald_params(cfg.f64(a.sigma, "sigma")?)?;
    let variant = build_variant(&a.lattice, &a.matern1, &a.matern2, &None)?;
    let spec = ProcessSpec {
        variant,
        window: *l_ladder.last().unwrap(),
        seed,
    };
    let est = randlimit::mc_limit(&spec, &l_ladder, replicates, &strain, seed, &params)?;
    let mut csv = String::from("L,value,std_error\n");
    for (l, (v, se)) in est.l_ladder.iter().zip(&est.per_l_values) {
        csv.push_str(&format!("{},{},{}\n", fnum(*l), fnum(*v), fnum(*se)));
    }
    emit_csv(a.csv.as_ref().or(cfg.path(None, "csv").as_ref()), &csv)?;
    println!(
        "{}",
        json_object(&[
            ("value", fnum(est.value)),
            ("std_error", fnum(est.std_error)),
            ("m_hat", fnum(est.m_hat)),
        ])
    );
    Ok(())
}

fn cmd_convergence(a: ConvergenceArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let strain = parse_strain(&required(cfg.string(a.strain, "strain"), "strain")?)?;
    let eps_spec = cfg
        .string(a.epsilons, "epsilons")
        .unwrap_or_else(|| "0.1,0.05".to_string());
    let epsilons = parse_f64_list(&eps_spec)?;
    for e in &epsilons {
        if !(e.is_finite() && *e > 0.0 && *e < 0.5) {
            return Err(Error::validation("epsilons must lie in (0, 0.5)"));
        }
    }
    let params = ewald_params(cfg.f64(a.sigma, "sigma")?)?;
    let domain = DomainO::unit_cube();
    let cell = CellSpec::new(1.0, vec![V3::zeros()])?;
    let limit = ewald::limit_periodic(&cell, &strain, &params)?;
    let mut csv = String::from("N,epsilon,V_N,limit,abs_err,rel_err\n");
    for &eps in &epsilons {
        let window = 2.0 * (0.5 / eps + 1.0).ceil();
        let lattice = processes::gen_lattice(1.0, &[V3::zeros()], window)?;
        let rescaled = processes::rescale_to_domain(&lattice, &domain, eps)?;
        let breakdown = vn::eval_vn(&rescaled, &domain, &strain)?;
        let abs_err = (breakdown.value - limit).abs();
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            breakdown.n,
            fnum(eps),
            fnum(breakdown.value),
            fnum(limit),
            fnum(abs_err),
            fnum(abs_err / limit.abs())
        ));
    }
    emit_csv(a.csv.as_ref().or(cfg.path(None, "csv").as_ref()), &csv)?;
    Ok(())
}

fn cmd_renorm_check(a: RenormCheckArgs) -> Result<()> {
    let cfg = FileCfg::load(a.config.as_ref())?;
    let strain = match cfg.string(a.strain, "strain") {
        Some(s) => parse_strain(&s)?,
        None => StrainMatrix::from_diag(1.0, -1.0, 0.0),
    };
    let sol = renorm::solve_interior_g1(&strain)?;
    let e_star = renorm::energy_constant(&strain, &sol);

    // <S^eta, G_S> = eta^-3 E* at three radii
    let g_s_field = |x: &V3| nu2_core::kernels::stresslet_g(x, &strain);
    let mut e_star_err: f64 = 0.0;
    for eta in [0.25, 0.5, 1.0] {
        let v = renorm::pair_with_s_eta(&g_s_field, &V3::zeros(), eta, &strain)?;
        e_star_err = e_star_err.max((v * eta.powi(3) - e_star).abs() / e_star.max(1e-300));
    }

    // integral of the smoothing tensor over its ball equals S
    let mut psi_err: f64 = 0.0;
    for eta in [0.5, 1.0] {
        let total = renorm::psi_total(eta, &strain, &sol)?;
        psi_err = psi_err.max((total - strain.matrix()).norm());
    }

    // zero total force of the surface measure
    let mut force_err: f64 = 0.0;
    for k in 0..3 {
        let mut e = V3::zeros();
        e[k] = 1.0;
        let constant = move |_: &V3| Ok(e);
        force_err = force_err.max(renorm::pair_with_s_eta(&constant, &V3::zeros(), 0.5, &strain)?.abs());
    }

    // smoothing limit against a linear field with a known gradient
    let grad = M3::new(0.3, -0.2, 0.1, 0.4, 0.0, -0.5, 0.2, 0.6, -0.3);
    let linear = |x: &V3| Ok(grad * x);
    let target = -strain.contract(&((grad + grad.transpose()) * 0.5));
    let v1 = renorm::pair_with_s_eta(&linear, &V3::zeros(), 0.2, &strain)?;
    let v2 = renorm::pair_with_s_eta(&linear, &V3::zeros(), 0.1, &strain)?;
    let smoothing_err = (2.0 * v2 - v1 - target).abs();

    // eta -> 0 pairing against phi_{S,1} = G_{S,1} - G_S recovers -k(S, 1)
    let params = EwaldParams::accurate();
    let phi = |x: &V3| -> Result<V3> {
        Ok(ewald::g_sl(x, &strain, 1.0, &params)? - nu2_core::kernels::stresslet_g(x, &strain)?)
    };
    let reg = ewald::regularization_constant(&strain, 1.0, &params)?;
    let p1 = renorm::pair_with_s_eta(&phi, &V3::zeros(), 0.1, &strain)?;
    let p2 = renorm::pair_with_s_eta(&phi, &V3::zeros(), 0.05, &strain)?;
    let pairing_err = ((4.0 * p2 - p1) / 3.0 + reg).abs();

    println!(
        "{}",
        json_object(&[
            ("e_star", fnum(e_star)),
            ("e_star_max_rel_err", fnum(e_star_err)),
            ("psi_total_max_err", fnum(psi_err)),
            ("total_force_max_err", fnum(force_err)),
            ("smoothing_richardson_err", fnum(smoothing_err)),
            ("phi_pairing_vs_reg_err", fnum(pairing_err)),
        ])
    );
    if e_star_err > 1e-8 || psi_err > 1e-8 || force_err > 1e-10 {
        return Err(Error::accuracy(
            "renormalization identities exceeded tolerance".to_string(),
        ));
    }
    if smoothing_err > 1e-6 || pairing_err > 1e-4 {
        return Err(Error::accuracy(
            "smoothing limits exceeded tolerance".to_string(),
        ));
    }
    Ok(())
}
