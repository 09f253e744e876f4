//! Command-line front end. Every subcommand writes one JSON document with a
//! `checks` block of identities verified during the run.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::derivatives::{derivative_report, directional_derivative, f_of, segment_point, Direction};
use crate::discrete_time::{compare_wedges, frak_f, frak_f_spectral, hunter_trace, kernel_spectrum, phi_map, psi_map, Kernel};
use crate::dp::{continuous_value_function, discrete_value_function, extract_policy_path, full_mask, ValueTable};
use crate::eigentime::{
    eigentime_spectral, h_matrix, h_matrix_from_moments, hitting_report, inverse_speed, kemeny_spread, return_time_identities,
    spectral_second_identity, spectrum, Spectrum,
};
use crate::error::Error;
use crate::experiments::{find_counterexample, perturbation_limit_probe, s2_closed_form, theorem2_probe, EPS_GRID};
use crate::generator::{cycle_generator, invariant_measure, Generator, ProbabilityVector};
use crate::graph::{Cycle, DirectedGraph};
use crate::linalg::{max_abs_diff, Matrix};
use crate::optimizer::{brute_force_minimize, frank_wolfe_minimize, OptimizeOptions};
use crate::sample;

#[derive(Debug, Parser)]
#[command(name = "fastchain", version, about = "Fastest mixing Markov chains on directed graphs")]
#[command(args_conflicts_with_subcommands = true, arg_required_else_help = true)]
pub struct Cli {
    /// Run the identity suite on built-in instances and print a pass/fail table.
    #[arg(long)]
    pub selftest: bool,

    /// Write the report here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inverse speed, spectrum, identities and optionally derivatives of a generator.
    Eval(EvalArgs),
    /// Minimize the inverse speed over generators compatible with a graph.
    Optimize(OptimizeArgs),
    /// Covering dynamic program.
    Dp(DpArgs),
    /// Discrete-time quantities of a kernel, or the wedge comparison.
    Discrete(DiscreteArgs),
    /// Search for a generator beating every Hamiltonian cycle.
    Counterexample(CounterexampleArgs),
    /// Closed-form minimizer on the three-vertex segment.
    S2(S2Args),
    /// Optimizer runs at random measures near uniform.
    ProbeTheorem2(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub generator: PathBuf,
    /// Invariant measure; computed from the generator when absent.
    #[arg(long)]
    pub pi: Option<PathBuf>,
    #[arg(long)]
    pub derivatives: bool,
    /// Direction cycle, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    pub cycle: Option<Vec<usize>>,
    /// Second direction cycle for the second derivative.
    #[arg(long, value_delimiter = ',')]
    pub cycle2: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub pi: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Also run the grid search when the graph has few cycles.
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DpMode {
    Discrete,
    Continuous,
}

#[derive(Debug, Args)]
pub struct DpArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_enum, default_value_t = DpMode::Discrete)]
    pub mode: DpMode,
    /// Per-vertex budgets summing to N; all ones when absent.
    #[arg(long)]
    pub budgets: Option<PathBuf>,
    /// Require a return to the start vertex (discrete mode).
    #[arg(long)]
    pub full_set: bool,
    #[arg(long, default_value_t = 0)]
    pub start: usize,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    #[arg(long, conflicts_with = "generator")]
    pub kernel: Option<PathBuf>,
    /// Generator mapped to a kernel by `K = I + L / l`.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long)]
    pub pi: Option<PathBuf>,
    /// Compare continuous and discrete infima over a graph (needs --graph and --pi).
    #[arg(long, requires_all = ["graph", "pi"])]
    pub compare: bool,
    #[arg(long)]
    pub graph: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Also report `|F(L_{r,eps}) - limit|` over the eps grid at this r.
    #[arg(long)]
    pub r: Option<f64>,
}

#[derive(Debug, Args)]
pub struct S2Args {
    #[arg(long)]
    pub pi: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    pub size: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Core(e) => e.exit_code(),
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Input(m) => write!(f, "{m}"),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: &'static str, residual: f64, tolerance: f64) -> Self {
        Check { name, residual, tolerance, passed: residual <= tolerance }
    }

    fn holds(name: &'static str, ok: bool) -> Self {
        Check { name, residual: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, passed: ok }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Writes every float with 17 significant digits.
struct Fixed17;

impl serde_json::ser::Formatter for Fixed17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> std::io::Result<()> {
        self.write_f64(w, v as f64)
    }
}

/// Serializes a report with 17 significant digits per float.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Fixed17);
    value.serialize(&mut ser).expect("reports serialize");
    buf.push(b'\n');
    String::from_utf8(buf).expect("utf-8")
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Outcome<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Input(format!("malformed {what} {}: {e}", path.display())))
}

fn configure_threads() {
    let n = std::env::var("FASTCHAIN_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()).unwrap_or(0);
    if n > 0 {
        // Fails only if a pool already exists, which is then reused.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    if cli.selftest {
        return selftest();
    }
    let Some(cmd) = cli.command else {
        eprintln!("error: no subcommand given");
        return 2;
    };
    let result = match &cmd {
        Command::Eval(a) => eval(a),
        Command::Optimize(a) => optimize(a),
        Command::Dp(a) => dp(a),
        Command::Discrete(a) => discrete(a),
        Command::Counterexample(a) => counterexample(a),
        Command::S2(a) => s2(a),
        Command::ProbeTheorem2(a) => probe(a),
    };
    match result {
        Ok((report, checks)) => {
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
            let mut report = report;
            report["checks"] = serde_json::to_value(&checks).expect("checks serialize");
            let text = to_json_string(&report);
            let written = match &cli.output {
                Some(p) => std::fs::write(p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
                None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return 2;
            }
            if failed.is_empty() {
                0
            } else {
                eprintln!("error: in-run checks failed: {}", failed.join(", "));
                3
            }
        }
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

type Report = Outcome<(Value, Vec<Check>)>;

fn load_pi_for(l: &Generator, path: Option<&PathBuf>) -> Outcome<ProbabilityVector> {
    let pi = match path {
        Some(p) => read_json::<ProbabilityVector>(p, "measure")?,
        None => invariant_measure(l)?,
    };
    if pi.len() != l.n() {
        return Err(Error::DimensionMismatch { expected: l.n(), found: pi.len() }.into());
    }
    Ok(pi)
}

fn cycle_arg(v: &Option<Vec<usize>>) -> Outcome<Option<Cycle>> {
    v.as_ref().map(|c| Cycle::new(c.clone()).map_err(Failure::from)).transpose()
}

fn eval(a: &EvalArgs) -> Report {
    let l: Generator = read_json(&a.generator, "generator")?;
    let pi = load_pi_for(&l, a.pi.as_ref())?;
    l.check_invariant(&pi)?;
    let hit = hitting_report(&l, &pi)?;
    let spec = spectrum(&l)?;
    let f_spectral = eigentime_spectral(&l)?;
    let (s2_lhs, s2_rhs) = spectral_second_identity(&l, &pi)?;
    let returns = (0..l.n()).map(|y| return_time_identities(&l, &pi, y)).collect::<Result<Vec<_>, _>>()?;
    let e = Matrix::from_fn(l.n(), l.n(), |i, j| hit.expectations[i][j]);
    let h_two = max_abs_diff(&h_matrix(&l, &pi)?, &h_matrix_from_moments(&l, &pi)?);

    let mut checks = vec![
        Check::new("eigentime_first", rel(hit.f_value, f_spectral), 1e-8),
        Check::new("eigentime_second", rel(s2_lhs, s2_rhs), 1e-8),
        Check::new("kemeny_constancy", kemeny_spread(&pi, &e) / hit.kemeny.abs().max(1.0), 1e-9),
        Check::new("h_two_routes", h_two / hit.f_value.max(1.0).powi(2), 1e-8),
        Check::new("spectrum_conjugation", spec.conjugation_defect(), 1e-8),
        Check::new(
            "return_time_kac",
            returns
                .iter()
                .enumerate()
                .map(|(y, r)| (r.holding_correction - (1.0 / l.exit_rate(y) - 1.0)).abs() / (1.0 / l.exit_rate(y)).max(1.0))
                .fold(0.0, f64::max),
            1e-8,
        ),
    ];

    let mut report = json!({
        "n": l.n(),
        "pi": pi,
        "f": hit.f_value,
        "f_spectral": f_spectral,
        "equilibrium_jump_rate": l.equilibrium_jump_rate(&pi),
        "spectrum": spec,
        "hitting": hit,
        "identities": {
            "spectral_second": {"lhs": s2_lhs, "rhs": s2_rhs},
            "return_times": returns,
        },
    });

    if a.derivatives {
        let Some(c) = cycle_arg(&a.cycle)? else {
            return Err(Failure::Input("--derivatives needs --cycle".into()));
        };
        let c2 = cycle_arg(&a.cycle2)?;
        let d = derivative_report(&l, &pi, &c, c2.as_ref())?;
        let dir = cycle_generator(&pi, &c)?;
        let t = 1e-5 * l.max_exit_rate().max(1.0).recip();
        // Second-order one-sided difference: rates may not allow stepping backwards.
        let f_at = |s: f64| -> Outcome<f64> { Ok(f_of(&segment_point(&l, &dir, s)?, &pi)?) };
        let fd = (-3.0 * d.f_value + 4.0 * f_at(t)? - f_at(2.0 * t)?) / (2.0 * t);
        let route = directional_derivative(&l, &pi, &Direction::Matrix(dir))?;
        checks.push(Check::new("derivative_two_routes", rel(d.first, route), 1e-8));
        checks.push(Check::new("derivative_finite_difference", rel(d.first, fd), 1e-5));
        report["derivatives"] = serde_json::to_value(&d).expect("serialize");
    }
    Ok((report, checks))
}

fn optimize(a: &OptimizeArgs) -> Report {
    let g: DirectedGraph = read_json(&a.graph, "graph")?;
    let pi: ProbabilityVector = read_json(&a.pi, "measure")?;
    if pi.len() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), found: pi.len() }.into());
    }
    if a.tol.is_nan() || a.tol <= 0.0 || a.max_iters == 0 {
        return Err(Failure::Input("tol must be positive and max-iters nonzero".into()));
    }
    let opts = OptimizeOptions { tol: a.tol, max_iters: a.max_iters, restarts: a.restarts, seed: a.seed, ..OptimizeOptions::default() };
    let rep = frank_wolfe_minimize(&g, &pi, &opts)?;
    if !rep.converged {
        return Err(Error::NotConverged(rep.iterations).into());
    }
    let f_direct = inverse_speed(&rep.minimizer, &pi)?;
    let mut checks = vec![
        Check::new("stationarity_gap", rep.certificate.max_gap, a.tol.max(1e-8)),
        Check::new("normalized", (rep.minimizer.equilibrium_jump_rate(&pi) - 1.0).abs(), 1e-10),
        Check::new("invariance", rep.minimizer.invariance_residual(&pi), 1e-10),
        Check::new("f_recomputed", rel(rep.f_min, f_direct), 1e-10),
    ];
    let mut report = serde_json::to_value(&rep).expect("serialize");
    if let Some(res) = a.grid {
        let bf = brute_force_minimize(&g, &pi, res)?;
        checks.push(Check::new("grid_not_better", (rep.f_min - bf.f_min).max(0.0) / bf.f_min, 1e-6));
        report["grid_f_min"] = json!(bf.f_min);
    }
    Ok((report, checks))
}

fn path_cost(path: &[usize], target: u32, cost: impl Fn(usize, u32) -> f64) -> f64 {
    let mut mask = target;
    let mut total = 0.0;
    for w in path.windows(2) {
        total += cost(w[0], mask);
        mask &= !(1 << w[1]);
    }
    total
}

fn dp(a: &DpArgs) -> Report {
    let g: DirectedGraph = read_json(&a.graph, "graph")?;
    let n = g.n();
    if n > crate::dp::MAX_DP_VERTICES {
        return Err(Error::StateSpaceTooLarge(n).into());
    }
    if a.start >= n {
        return Err(Failure::Input(format!("start vertex {} out of range", a.start)));
    }
    let (table, budgets): (ValueTable, Vec<f64>) = match a.mode {
        DpMode::Discrete => {
            if a.budgets.is_some() {
                return Err(Failure::Input("--budgets applies to continuous mode".into()));
            }
            let target = if a.full_set { full_mask(n) } else { full_mask(n) & !(1 << a.start) };
            (discrete_value_function(&g, a.start, target)?, vec![1.0; n])
        }
        DpMode::Continuous => {
            if a.full_set {
                return Err(Failure::Input("--full-set applies to discrete mode".into()));
            }
            let b: Vec<f64> = match &a.budgets {
                Some(p) => read_json(p, "budgets")?,
                None => vec![1.0; n],
            };
            (continuous_value_function(&g, a.start, &b)?, b)
        }
    };
    let value = table.value();
    let path = extract_policy_path(&table, a.start);
    let walked = path_cost(&path, table.target, |i, m| m.count_ones() as f64 / budgets[i]);
    let visits_all = (0..n).all(|v| table.target >> v & 1 == 0 || path[1..].contains(&v));
    let arcs_ok = path.windows(2).all(|w| g.has_edge(w[0], w[1]));
    let checks = vec![
        Check::new("path_cost_matches_value", rel(walked, value), 1e-12),
        Check::holds("path_covers_target", visits_all && arcs_ok),
    ];
    Ok((json!({"value": value, "path": path, "mode": format!("{:?}", a.mode).to_lowercase(), "start": a.start}), checks))
}

fn kernel_invariant(k: &Kernel) -> Outcome<ProbabilityVector> {
    let n = k.n();
    let l = Generator::new(k.matrix() - Matrix::identity(n, n))?;
    Ok(invariant_measure(&l)?)
}

fn discrete(a: &DiscreteArgs) -> Report {
    if a.compare {
        let g: DirectedGraph = read_json(a.graph.as_ref().expect("required by clap"), "graph")?;
        let pi: ProbabilityVector = read_json(a.pi.as_ref().expect("required by clap"), "measure")?;
        if pi.len() != g.n() {
            return Err(Error::DimensionMismatch { expected: g.n(), found: pi.len() }.into());
        }
        let w = compare_wedges(&g, &pi)?;
        let recomputed = frak_f(&w.kernel, &pi)?;
        let checks = vec![
            Check::new("gap_nonnegative", (-w.gap).max(0.0), 1e-8),
            Check::new("kernel_value_recomputed", rel(recomputed, w.frak_f_wedge), 1e-10),
        ];
        return Ok((serde_json::to_value(&w).expect("serialize"), checks));
    }
    let mut checks = Vec::new();
    let (k, pi, from_generator) = match (&a.kernel, &a.generator) {
        (Some(p), None) => {
            let k: Kernel = read_json(p, "kernel")?;
            let pi = match &a.pi {
                Some(q) => read_json::<ProbabilityVector>(q, "measure")?,
                None => kernel_invariant(&k)?,
            };
            (k, pi, None)
        }
        (None, Some(p)) => {
            let l: Generator = read_json(p, "generator")?;
            let pi = load_pi_for(&l, a.pi.as_ref())?;
            let (k, lmax) = phi_map(&l)?;
            (k, pi, Some((l, lmax)))
        }
        _ => return Err(Failure::Input("give exactly one of --kernel, --generator, or use --compare".into())),
    };
    if pi.len() != k.n() {
        return Err(Error::DimensionMismatch { expected: k.n(), found: pi.len() }.into());
    }
    k.check_invariant(&pi)?;
    let f = frak_f(&k, &pi)?;
    let f_spec = frak_f_spectral(&k)?;
    let trace = hunter_trace(&k, &pi)?;
    let (l_back, kmax) = psi_map(&k, &pi)?;
    let f_back = inverse_speed(&l_back, &pi)?;
    checks.push(Check::new("eigentime_discrete", rel(f, f_spec), 1e-8));
    checks.push(Check::new("hunter_trace", rel(f + 1.0, trace), 1e-8));
    checks.push(Check::new("psi_scaling", rel(f_back, f / kmax), 1e-8));
    let mut report = json!({
        "frak_f": f,
        "frak_f_spectral": f_spec,
        "hunter_trace": trace,
        "spectrum": Spectrum::from_values(kernel_spectrum(&k)?),
        "psi_generator": l_back,
        "k": kmax,
    });
    if let Some((l, lmax)) = from_generator {
        let f_l = inverse_speed(&l, &pi)?;
        checks.push(Check::new("phi_scaling", rel(f, lmax * f_l), 1e-8));
        checks.push(Check::new("psi_of_phi_identity", max_abs_diff(&(l_back.matrix() / kmax), &(l.matrix() / lmax)), 1e-12));
        report["l"] = json!(lmax);
        report["f"] = json!(f_l);
    }
    Ok((report, checks))
}

fn counterexample(a: &CounterexampleArgs) -> Report {
    let g: DirectedGraph = read_json(&a.graph, "graph")?;
    let rep = find_counterexample(&g)?;
    let min_h = rep.hamiltonian_values.iter().map(|h| h.f).fold(f64::INFINITY, f64::min);
    let expected_mult = g.n() - rep.short_cycle.len();
    let checks = vec![
        Check::holds("margin_positive", rep.margin > 0.0),
        Check::new("hamiltonian_formula", rel(min_h, rep.hamiltonian_formula), 1e-8),
        Check::holds("multiplicity", rep.extended.multiplicity == expected_mult),
        Check::new("spectrum_split", rep.extended.split_error / rep.r.max(1.0), 1e-6),
    ];
    let mut report = serde_json::to_value(&rep).expect("serialize");
    if let Some(r) = a.r {
        if !(r.is_finite() && r > 0.0) {
            return Err(Failure::Input("r must be positive".into()));
        }
        let probe = perturbation_limit_probe(&g, &rep.short_cycle, r, &EPS_GRID)?;
        report["limit_probe"] = json!(probe.iter().map(|(e, d)| json!({"eps": e, "distance": d})).collect::<Vec<_>>());
    }
    Ok((report, checks))
}

fn s2(a: &S2Args) -> Report {
    let pi: Vec<f64> = read_json(&a.pi, "measure")?;
    let rep = s2_closed_form(&pi)?;
    let pv = ProbabilityVector::new(pi)?;
    let f_direct = inverse_speed(&rep.generator, &pv)?;
    let checks = vec![Check::new("closed_form_matches_f", rel(rep.f_min, f_direct), 1e-10)];
    Ok((serde_json::to_value(&rep).expect("serialize"), checks))
}

fn probe(a: &ProbeArgs) -> Report {
    let g: DirectedGraph = read_json(&a.graph, "graph")?;
    let rep = theorem2_probe(&g, a.size, a.trials, a.seed)?;
    let max_l1 = rep.trials.iter().map(|t| t.l1_distance).fold(0.0, f64::max);
    let checks = vec![Check::new("measures_within_size", (max_l1 - a.size).max(0.0), 1e-12)];
    Ok((serde_json::to_value(&rep).expect("serialize"), checks))
}

/// Identity suite on built-in instances.
pub fn selftest_checks() -> Vec<(String, bool, f64)> {
    let mut rows: Vec<(String, bool, f64)> = Vec::new();
    let mut push = |name: &str, r: Result<f64, Error>, tol: f64| {
        let (ok, res) = match r {
            Ok(v) => (v <= tol, v),
            Err(_) => (false, f64::NAN),
        };
        rows.push((name.to_string(), ok, res));
    };

    let u3 = ProbabilityVector::uniform(3);
    let c3 = Cycle::new(vec![0, 1, 2]).expect("cycle");
    push(
        "hamiltonian K3 uniform F = 1",
        cycle_generator(&u3, &c3).and_then(|l| inverse_speed(&l, &u3)).map(|f| (f - 1.0).abs()),
        1e-12,
    );

    let mut rng = sample::rng(2024);
    let pi5 = sample::random_probability(5, &mut rng);
    let l5 = sample::random_generator(&pi5, 4, &mut rng).expect("sample");
    push(
        "eigentime hitting = spectral",
        inverse_speed(&l5, &pi5).and_then(|f| Ok(rel(f, eigentime_spectral(&l5)?))),
        1e-8,
    );
    push("second spectral identity", spectral_second_identity(&l5, &pi5).map(|(a, b)| rel(a, b)), 1e-8);
    push(
        "kemeny constancy",
        crate::eigentime::expected_hitting_times(&l5, &pi5).map(|e| kemeny_spread(&pi5, &e)),
        1e-9,
    );
    push(
        "h kernel two routes",
        h_matrix(&l5, &pi5).and_then(|a| Ok(max_abs_diff(&a, &h_matrix_from_moments(&l5, &pi5)?))),
        1e-8,
    );
    let dir = sample::random_cycle(5, 3, &mut rng);
    push(
        "directional derivative vs finite difference",
        (|| {
            let d = directional_derivative(&l5, &pi5, &Direction::Cycle(dir.clone()))?;
            let m = cycle_generator(&pi5, &dir)?;
            let t = 1e-5;
            let fd = (f_of(&segment_point(&l5, &m, t)?, &pi5)? - f_of(&segment_point(&l5, &m, -t)?, &pi5)?) / (2.0 * t);
            Ok(rel(d, fd))
        })(),
        1e-6,
    );
    push(
        "segment uniform optimum 16/9",
        DirectedGraph::segment(2)
            .and_then(|g| frank_wolfe_minimize(&g, &u3, &OptimizeOptions::default()))
            .map(|r| (r.f_min - 16.0 / 9.0).abs()),
        1e-8,
    );
    push(
        "segment closed form at (0.2, 0.3, 0.5)",
        s2_closed_form(&[0.2, 0.3, 0.5]).map(|r| (r.f_min - 1.62).abs()),
        1e-12,
    );
    push(
        "covering program on K4",
        DirectedGraph::complete(4).and_then(|g| {
            let a = discrete_value_function(&g, 0, full_mask(4) & !1)?.value();
            let b = discrete_value_function(&g, 0, full_mask(4))?.value();
            Ok((a - 6.0).abs() + (b - 10.0).abs())
        }),
        0.0,
    );
    push(
        "hunter trace",
        phi_map(&l5).and_then(|(k, _)| Ok(rel(frak_f(&k, &pi5)? + 1.0, hunter_trace(&k, &pi5)?))),
        1e-8,
    );
    push(
        "triangle with leaf counterexample",
        DirectedGraph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)])
            .and_then(|g| find_counterexample(&g))
            .map(|r| if r.margin > 0.0 { 0.0 } else { 1.0 }),
        0.0,
    );
    rows
}

fn selftest() -> i32 {
    let rows = selftest_checks();
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut all = true;
    for (name, ok, res) in &rows {
        all &= ok;
        println!("{:<width$}  {}  residual {:.3e}", name, if *ok { "PASS" } else { "FAIL" }, res);
    }
    println!("{} of {} checks passed", rows.iter().filter(|r| r.1).count(), rows.len());
    if all {
        0
    } else {
        3
    }
}
