use crate::config::{RunConfig, Task};
use crate::report::{csv, intervals, mourre_seed, num, At, Section, Status, TaskError};
use rayon::prelude::*;
use serde::Serialize;
use toeplitz_spectra::eig::{eigs_in_interval, gap_eigenvalues, EigOptions, ValidatedEigenpair};
use toeplitz_spectra::formats::{vector_on_window, write_vector};
use toeplitz_spectra::lap::{default_mu_grid, lap_sweep, mu_floor, LapOptions};
use toeplitz_spectra::lattice::PlateauWindow;
use toeplitz_spectra::linalg::norm;
use toeplitz_spectra::mourre::{mourre_check, mourre_stability, MourreOptions, MourreReport};
use toeplitz_spectra::perturb::{classify, CheckVerdict};
use toeplitz_spectra::scatter::{
    chebyshev_propagate, completeness_check, energy_filtered_states, intertwining_window, propagation_decay,
    wave_operator, Completeness, DecayOptions, PacProjector, PropagatorPlan, Sign, WaveOperatorResult,
    DEFAULT_PROP_EPS, INTERTWINING_DEGREE, OUTER_FRACTION,
};
use toeplitz_spectra::symbol::{compute_bands, compute_critical_set, essential_spectrum, BandStructure, CriticalSet};
use toeplitz_spectra::{LatticeModel, C64};

type TaskResult = Result<Section, TaskError>;

/// Runs the configured task; each returned section carries its own status.
pub fn run(cfg: &RunConfig) -> Vec<Section> {
    let single = |name: &str, r: TaskResult| vec![r.unwrap_or_else(|e| Section::failed(name, e))];
    match cfg.task {
        Task::Bands => single("bands", bands(cfg)),
        Task::Spectrum => single("spectrum", spectrum(cfg)),
        Task::GapEigs => single("gap-eigs", gap_eigs(cfg)),
        Task::MourreCheck => single("mourre-check", mourre_task(cfg)),
        Task::LapSweep => single("lap-sweep", lap_task(cfg)),
        Task::Classify => single("classify", classify_task(cfg)),
        Task::Propagate => single("propagate", propagate(cfg)),
        Task::WaveOp => single("wave-op", wave_op(cfg)),
        Task::FullReport => full_report(cfg),
    }
}

fn eig_options(cfg: &RunConfig) -> EigOptions {
    EigOptions {
        seed: cfg.seed_value,
        ..EigOptions::default()
    }
}

fn band_data(cfg: &RunConfig) -> Result<(BandStructure, CriticalSet), TaskError> {
    let b = compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?;
    let k = compute_critical_set(&cfg.symbol, &b).at("symbol", "compute_critical_set")?;
    Ok((b, k))
}

#[derive(Serialize)]
struct BandRecord {
    index: usize,
    interval: (f64, f64),
    flat: bool,
}

#[derive(Serialize)]
struct BandsData {
    grid_size: usize,
    scale: f64,
    max_residual: f64,
    max_group_velocity: f64,
    bands: Vec<BandRecord>,
    sorted_bands: Vec<(f64, f64)>,
}

fn bands(cfg: &RunConfig) -> TaskResult {
    let b = compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?;
    let mut s = Section::new("bands");
    bands_into(&mut s, &b);
    Ok(s)
}

fn bands_into(s: &mut Section, b: &BandStructure) {
    s.line(format!("grid size K = {}", b.grid_size()));
    s.line(format!("eigensolver residual = {:e}", b.max_residual));
    s.line(format!("max group velocity = {}", num(b.max_group_velocity())));
    s.line("analytic branch  lower  upper  flat");
    for (j, br) in b.branches.iter().enumerate() {
        s.line(format!("{j}  {}  {}  {}", num(br.interval.0), num(br.interval.1), br.flat));
    }
    s.line("sorted band  lower  upper");
    for (j, (lo, hi)) in sorted_bands(b).iter().enumerate() {
        s.line(format!("{j}  {}  {}", num(*lo), num(*hi)));
    }
    let n = b.band_count();
    let mut head = vec!["p".to_string()];
    head.extend((0..n).map(|j| format!("lambda_{j}")));
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let rows = b.grid.iter().zip(&b.sorted).map(|(p, v)| {
        let mut r = vec![*p];
        r.extend(v);
        r
    });
    s.file("bands.csv", csv(&head, rows));
    s.set_data(&BandsData {
        grid_size: b.grid_size(),
        scale: b.scale,
        max_residual: b.max_residual,
        max_group_velocity: b.max_group_velocity(),
        bands: b
            .branches
            .iter()
            .enumerate()
            .map(|(index, br)| BandRecord {
                index,
                interval: br.interval,
                flat: br.flat,
            })
            .collect(),
        sorted_bands: sorted_bands(b),
    });
}

#[derive(Serialize)]
struct SpectrumData<'a> {
    essential_spectrum: &'a [(f64, f64)],
    critical_set: &'a CriticalSet,
    flat_bands: Vec<f64>,
}

fn spectrum(cfg: &RunConfig) -> TaskResult {
    let (b, kappa) = band_data(cfg)?;
    let mut s = Section::new("spectrum");
    spectrum_into(&mut s, &b, &kappa);
    Ok(s)
}

fn spectrum_into(s: &mut Section, b: &BandStructure, kappa: &CriticalSet) {
    let ess = essential_spectrum(b);
    let flat: Vec<f64> = b.branches.iter().filter(|br| br.flat).map(|br| br.interval.0).collect();
    s.line(format!("essential spectrum: {}", intervals(&ess)));
    for v in &flat {
        s.line(format!("flat band (infinitely degenerate eigenvalue): {}", num(*v)));
    }
    s.line("critical set:");
    for c in &kappa.points {
        s.line(format!("  {}  {:?}  witness p = {}", num(c.value), c.kind, num(c.witness)));
    }
    s.set_data(&SpectrumData {
        essential_spectrum: &ess,
        critical_set: kappa,
        flat_bands: flat,
    });
}

/// Open gaps of the essential spectrum, including the two unbounded ones
/// cut at the Gershgorin hull of the section.
fn all_gaps(model: &LatticeModel, b: &BandStructure, half_length: usize) -> Result<Vec<(f64, f64)>, TaskError> {
    let ess = essential_spectrum(b);
    let (glo, ghi) = model.assemble(half_length).at("lattice", "assemble")?.gershgorin();
    let mut gaps = Vec::new();
    let first = ess.first().map_or(ghi, |r| r.0);
    if glo - 1.0 < first {
        gaps.push((glo - 1.0, first));
    }
    for w in ess.windows(2) {
        if w[1].0 > w[0].1 {
            gaps.push((w[0].1, w[1].0));
        }
    }
    let last = ess.last().map_or(glo, |r| r.1);
    if ghi + 1.0 > last {
        gaps.push((last, ghi + 1.0));
    }
    Ok(gaps)
}

#[derive(Serialize)]
struct GapRecord {
    gap: (f64, f64),
    eigenpairs: Vec<EigRecord>,
}

#[derive(Serialize)]
struct EigRecord {
    value: f64,
    multiplicity: usize,
    residual: f64,
    boundary_mass: f64,
    stability: Option<f64>,
}

impl From<&ValidatedEigenpair> for EigRecord {
    fn from(e: &ValidatedEigenpair) -> Self {
        EigRecord {
            value: e.value,
            multiplicity: e.multiplicity,
            residual: e.residual,
            boundary_mass: e.boundary_mass,
            stability: e.stability,
        }
    }
}

/// Certified eigenpairs in each gap; `Err` entries are per-gap failures.
fn certified(
    model: &LatticeModel,
    gaps: &[(f64, f64)],
    half_length: usize,
    opts: &EigOptions,
) -> Vec<((f64, f64), Result<Vec<ValidatedEigenpair>, TaskError>)> {
    gaps.iter()
        .map(|&g| (g, gap_eigenvalues(model, g, half_length, opts).at("eig", "gap_eigenvalues")))
        .collect()
}

fn gap_eigs(cfg: &RunConfig) -> TaskResult {
    let model = cfg.model();
    let gaps = match cfg.gap {
        Some(g) => vec![g],
        None => {
            let b = compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?;
            all_gaps(&model, &b, cfg.half_length)?
        }
    };
    let mut s = Section::new("gap-eigs");
    let found = certified(&model, &gaps, cfg.half_length, &eig_options(cfg));
    if found.iter().all(|r| r.1.is_err()) {
        if let Some((_, Err(e))) = found.into_iter().next() {
            return Err(e);
        }
        unreachable!("at least one gap");
    }
    gap_eigs_into(&mut s, &model, cfg.half_length, found);
    Ok(s)
}

fn gap_eigs_into(
    s: &mut Section,
    model: &LatticeModel,
    half_length: usize,
    found: Vec<((f64, f64), Result<Vec<ValidatedEigenpair>, TaskError>)>,
) -> Vec<f64> {
    let window = model.window(half_length);
    let mut records = Vec::new();
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut k = 0;
    s.line("gap  value  multiplicity  residual  boundary_mass  stability");
    for (g, r) in found {
        match r {
            Ok(pairs) => {
                if pairs.is_empty() {
                    s.line(format!("({}, {})  none", num(g.0), num(g.1)));
                }
                for e in &pairs {
                    s.line(format!(
                        "({}, {})  {}  {}  {:.3e}  {:.3e}  {}",
                        num(g.0),
                        num(g.1),
                        num(e.value),
                        e.multiplicity,
                        e.residual,
                        e.boundary_mass,
                        e.stability.map_or("-".into(), |x| format!("{x:.3e}"))
                    ));
                    rows.push(vec![g.0, g.1, e.value, e.multiplicity as f64, e.residual, e.boundary_mass]);
                    values.push(e.value);
                    s.file(format!("gap-eigs-vector-{k}.txt"), write_vector(&e.vector, &window));
                    k += 1;
                }
                records.push(GapRecord {
                    gap: g,
                    eigenpairs: pairs.iter().map(EigRecord::from).collect(),
                });
            }
            Err(e) => {
                s.line(format!("({}, {})  error: {e}", num(g.0), num(g.1)));
                s.inconclusive(format!("gap ({}, {}) failed", num(g.0), num(g.1)));
            }
        }
    }
    s.file(
        "gap-eigs.csv",
        csv(&["gap_lo", "gap_hi", "value", "multiplicity", "residual", "boundary_mass"], rows),
    );
    s.set_data(&records);
    values
}

/// Ranges of the sorted eigencurves `lambda_1 <= ... <= lambda_N`.
fn sorted_bands(b: &BandStructure) -> Vec<(f64, f64)> {
    (0..b.band_count())
        .map(|j| {
            b.sorted.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[j]), hi.max(v[j])))
        })
        .collect()
}

fn dispersive(b: &BandStructure) -> Vec<(f64, f64)> {
    let tol = 1e-10 * b.scale.max(1.0);
    sorted_bands(b).into_iter().filter(|(lo, hi)| hi - lo > tol).collect()
}

/// Middle third of each dispersive sorted band, cut down to its longest
/// piece at distance at least a tenth of its width from the critical set.
fn band_thirds(b: &BandStructure, kappa: &CriticalSet) -> Vec<(f64, f64)> {
    dispersive(b)
        .into_iter()
        .filter_map(|(lo, hi)| {
            let t = (hi - lo) / 3.0;
            let (a, c) = (lo + t, hi - t);
            let gap = (c - a) / 10.0;
            let mut cuts = vec![a];
            for v in kappa.values() {
                if v > a - gap && v < c + gap {
                    cuts.push(v - gap);
                    cuts.push(v + gap);
                }
            }
            cuts.push(c);
            cuts.chunks(2)
                .map(|w| (w[0].max(a), w[1].min(c)))
                .filter(|(x, y)| y > x)
                .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
        })
        .collect()
}

/// Largest filter degree the CLI escalates to.
const MAX_MOURRE_DEGREE: usize = 2048;

/// Options for `delta`: the default degree, or the degree the filter asks
/// for when the default misses its tolerance.
fn mourre_options(model: &LatticeModel, delta: (f64, f64), seed: usize) -> Result<MourreOptions, TaskError> {
    let opts = MourreOptions::default();
    match mourre_check(model, delta, seed.min(8), &opts) {
        Err(toeplitz_spectra::Error::FilterDegree {
            required: Some(d), ..
        }) if d <= MAX_MOURRE_DEGREE => Ok(MourreOptions {
            degree: d + d / 10,
            ..opts
        }),
        Err(e @ toeplitz_spectra::Error::FilterDegree { .. }) => Err(e).at("mourre", "mourre_check"),
        _ => Ok(opts),
    }
}

fn mourre_line(s: &mut Section, r: &MourreReport) {
    s.line(format!(
        "delta ({}, {}): lower bound {}, bulk lower bound {}, defect rank {}, subspace {}, degree {}, filter tail {:.3e}, grid {}",
        num(r.delta.0),
        num(r.delta.1),
        num(r.lower_bound),
        r.bulk_lower_bound.map_or("-".into(), num),
        r.defect_rank,
        r.subspace_dim,
        r.degree,
        r.filter_tail,
        r.grid_size
    ));
}

fn mourre_task(cfg: &RunConfig) -> TaskResult {
    let deltas = match cfg.delta {
        Some(d) => vec![d],
        None => {
            let (b, kappa) = band_data(cfg)?;
            band_thirds(&b, &kappa)
        }
    };
    let model = cfg.laurent_model();
    let seed = mourre_seed(cfg);
    let mut s = Section::new("mourre-check");
    s.line(format!("two-sided operator, seed half-lengths {seed} and {}", 2 * seed));
    let mut out = Vec::new();
    for d in deltas {
        let opts = mourre_options(&model, d, seed)?;
        let st = mourre_stability(&model, d, seed, &opts).at("mourre", "mourre_check")?;
        mourre_line(&mut s, &st.base);
        mourre_line(&mut s, &st.doubled);
        s.line(format!("defect rank stable under L -> 2L: {}", st.stable));
        if !st.stable {
            s.inconclusive("defect rank changes by more than 2 under L -> 2L");
        }
        out.push(st);
    }
    s.set_data(&out);
    Ok(s)
}

/// Quarter points of each dispersive sorted band.
fn band_energies(b: &BandStructure) -> Vec<f64> {
    dispersive(b)
        .into_iter()
        .flat_map(|(lo, hi)| [0.25, 0.5, 0.75].map(|f| lo + f * (hi - lo)))
        .collect()
}

fn lap_into(s: &mut Section, model: &LatticeModel, cfg: &RunConfig, energies: &[f64]) -> Result<(), TaskError> {
    let opts = LapOptions {
        eig: eig_options(cfg),
        ..LapOptions::default()
    };
    let probes = energies
        .iter()
        .map(|&x| lap_sweep(model, x, cfg.s, None, cfg.half_length, &opts).at("lap", "lap_sweep"))
        .collect::<Result<Vec<_>, _>>()?;
    s.line(format!("s = {}, L = {} and {}", num(cfg.s), cfg.half_length, 2 * cfg.half_length));
    s.line("x  verdict  decade_ratio  slope  window_agreement  mu_min  nearby_eigenvalue");
    let mut rows = Vec::new();
    for p in &probes {
        s.line(format!(
            "{}  {}  {}  {}  {:.3e}  {:.3e}  {}",
            num(p.x),
            p.verdict,
            num(p.decade_ratio),
            num(p.slope),
            p.window_agreement,
            p.mu_min,
            p.nearby_eigenvalue.map_or("-".into(), num)
        ));
        rows.extend(p.rows.iter().map(|r| vec![p.x, r.mu, r.norm, r.norm_doubled, r.condition]));
    }
    s.file("lap-sweep.csv", csv(&["x", "mu", "norm", "norm_doubled", "condition"], rows));
    s.set_data(&probes);
    Ok(())
}

fn lap_task(cfg: &RunConfig) -> TaskResult {
    let energies = if !cfg.energies.is_empty() {
        cfg.energies.clone()
    } else if let Some((lo, hi)) = cfg.delta {
        vec![0.5 * (lo + hi)]
    } else {
        band_energies(&compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?)
    };
    let mut s = Section::new("lap-sweep");
    lap_into(&mut s, &cfg.model(), cfg, &energies)?;
    Ok(s)
}

fn classify_task(cfg: &RunConfig) -> TaskResult {
    let spec = cfg.perturbation.as_ref().expect("checked at config time");
    let d = classify(spec, cfg.kmax).at("perturb", "classify")?;
    let mut s = Section::new("classify");
    s.line(format!(
        "Schur row/column bounds {} / {}, norm bound {}, Hilbert-Schmidt {}",
        num(d.schur.r),
        num(d.schur.c),
        num(d.norm_bound),
        num(d.hs_norm)
    ));
    s.line(format!("bounded: {}", d.bounded));
    s.line("r  dyadic_norm  upper  n_V  p_V");
    for i in 0..d.r_grid.len() {
        s.line(format!(
            "{}  {:.6e}  {:.6e}  {:.6e}  {:.6e}",
            num(d.r_grid[i]),
            d.dyadic_norms[i],
            d.dyadic_upper[i],
            d.n_values[i],
            d.p_values[i]
        ));
    }
    s.line(format!(
        "compactness: {} (slope {})",
        d.compact.verdict,
        num(d.compact.slope)
    ));
    s.line(format!(
        "integrability: {} (slope {}, residual {}, window {:?}) {}",
        d.c11.verdict,
        num(d.c11.slope),
        num(d.c11.residual),
        d.c11.fit_window,
        d.c11.note
    ));
    s.line(format!(
        "power-law exponent: {} +- {}{}",
        num(d.cs.s_fit),
        num(d.cs.stderr),
        if d.cs.inconclusive { " (inconclusive)" } else { "" }
    ));
    if d.c11.verdict == CheckVerdict::Inconclusive {
        s.inconclusive("integrability test");
    }
    if d.compact.verdict == CheckVerdict::Inconclusive {
        s.inconclusive("compactness test");
    }
    let rows = (0..d.r_grid.len()).map(|i| vec![d.r_grid[i], d.dyadic_norms[i], d.dyadic_upper[i], d.n_values[i], d.p_values[i]]);
    s.file("classify.csv", csv(&["r", "dyadic_norm", "dyadic_upper", "n_v", "p_v"], rows));
    s.set_data(&d);
    Ok(s)
}

/// `k` log-spaced times from `tmax / 10` to `tmax`.
fn time_grid(tmax: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| tmax * 10f64.powf(-1.0 + i as f64 / (k - 1) as f64))
        .collect()
}

/// Energy window for propagation: `--delta` or the middle third of the
/// widest dispersive band.
fn energy_window(cfg: &RunConfig, b: &BandStructure) -> Result<PlateauWindow, TaskError> {
    match cfg.delta {
        Some((lo, hi)) => Ok(PlateauWindow::inside(lo, hi, 0.25)),
        None => intertwining_window(b).at("scatter", "intertwining_window"),
    }
}

#[derive(Serialize)]
struct StateTrace {
    times: Vec<f64>,
    norms: Vec<f64>,
    outer_mass: Vec<f64>,
}

fn propagate(cfg: &RunConfig) -> TaskResult {
    let b = compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?;
    let free = LatticeModel::laurent(cfg.symbol.clone());
    let h0 = free.assemble(cfg.half_length).at("lattice", "assemble")?;
    let model = cfg.laurent_model();
    let h = model.assemble(cfg.half_length).at("lattice", "assemble")?;
    let plan = PropagatorPlan::for_matrices(&[&h0, &h], DEFAULT_PROP_EPS).at("scatter", "PropagatorPlan")?;
    let phi = energy_window(cfg, &b)?;
    let times = time_grid(cfg.tmax, 7);
    let opts = DecayOptions {
        seed: cfg.seed_value,
        ..DecayOptions::default()
    };
    let d = propagation_decay(&h0, phi, cfg.sigma, &times, &plan, &opts).at("scatter", "propagation_decay")?;
    let mut s = Section::new("propagate");
    s.line(format!(
        "free two-sided operator, sigma = {}, energy window inner [{}, {}], filter degree {}, inputs |n| <= {}",
        num(cfg.sigma),
        num(phi.inner.0),
        num(phi.inner.1),
        d.filter_degree,
        d.input_radius
    ));
    s.line("t  weighted_norm");
    for (t, g) in d.times.iter().zip(&d.values) {
        s.line(format!("{}  {:.6e}", num(*t), g));
    }
    s.line(format!("log-log slope {} (residual {:.3e})", num(d.slope), d.residual));
    s.file(
        "propagate.csv",
        csv(&["t", "weighted_norm"], d.times.iter().zip(&d.values).map(|(t, g)| vec![*t, *g])),
    );

    let w = *h.window();
    let psi = match &cfg.state {
        Some(recs) => vector_on_window(recs, &w).at("formats", "vector_on_window")?,
        None => w.unit(0, 0).expect("origin inside window"),
    };
    let traces = times
        .par_iter()
        .map(|&t| chebyshev_propagate(&h, &psi, t, &plan).at("scatter", "chebyshev_propagate"))
        .collect::<Result<Vec<_>, _>>()?;
    let trace = StateTrace {
        times: times.clone(),
        norms: traces.iter().map(|x| norm(x)).collect(),
        outer_mass: traces.iter().map(|x| w.outer_mass(x, OUTER_FRACTION)).collect(),
    };
    s.line("state under the full operator: t  norm  outer_mass");
    for i in 0..times.len() {
        s.line(format!(
            "{}  {}  {:.3e}",
            num(times[i]),
            num(trace.norms[i]),
            trace.outer_mass[i]
        ));
    }
    if let Some(last) = traces.last() {
        s.file("propagate-state.txt", write_vector(last, &w));
    }
    s.set_data(&serde_json::json!({ "decay": d, "state": trace }));
    Ok(s)
}

fn bound_states(model: &LatticeModel, b: &BandStructure, half_length: usize, opts: &EigOptions) -> Result<Vec<ValidatedEigenpair>, TaskError> {
    let h = model.assemble(half_length).at("lattice", "assemble")?;
    let mut out = Vec::new();
    for (lo, hi) in all_gaps(model, b, half_length)? {
        let pad = 1e-3 * b.scale.max(1e-12);
        if hi - lo > 2.0 * pad {
            out.extend(eigs_in_interval(&h, lo + pad, hi - pad, opts).at("eig", "eigs_in_interval")?);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct WaveData<'a> {
    results: &'a [WaveOperatorResult],
    bound_states: Vec<EigRecord>,
    completeness: toeplitz_spectra::scatter::CompletenessReport,
}

fn wave_op(cfg: &RunConfig) -> TaskResult {
    let b = compute_bands(&cfg.symbol, cfg.grid).at("symbol", "compute_bands")?;
    let model = cfg.laurent_model();
    let h = model.assemble(cfg.half_length).at("lattice", "assemble")?;
    let h0 = model.assemble_free(cfg.half_length).at("lattice", "assemble_free")?;
    let plan = PropagatorPlan::for_matrices(&[&h, &h0], DEFAULT_PROP_EPS).at("scatter", "PropagatorPlan")?;
    let pac = PacProjector::new(&model.symbol, &b, h.window()).at("scatter", "PacProjector")?;
    let fw = intertwining_window(&b).at("scatter", "intertwining_window")?;
    let w = *h.window();
    let inputs: Vec<Vec<C64>> = match &cfg.state {
        Some(recs) => vec![vector_on_window(recs, &w).at("formats", "vector_on_window")?],
        None => {
            let phi = energy_window(cfg, &b)?;
            let step = (cfg.half_length / 256).max(1) as i64;
            let pos: Vec<i64> = [-12, -4, 0, 4, 12].iter().map(|n| n * step).collect();
            energy_filtered_states(&h0, phi, &pos, INTERTWINING_DEGREE, &plan).at("scatter", "energy_filtered_states")?
        }
    };
    let times: Vec<f64> = [0.125, 0.25, 0.5, 1.0].iter().map(|f| f * cfg.big_tmax).collect();
    let results = inputs
        .par_iter()
        .flat_map(|psi| [Sign::Plus, Sign::Minus].into_par_iter().map(move |sg| (psi, sg)))
        .map(|(psi, sg)| wave_operator(&h, &h0, &pac, psi, sg, &times, fw, &plan).at("scatter", "wave_operator"))
        .collect::<Result<Vec<_>, _>>()?;
    let bound = bound_states(&model, &b, cfg.half_length, &eig_options(cfg))?;
    let plus: Vec<WaveOperatorResult> = results.iter().filter(|r| r.sign == Sign::Plus).cloned().collect();
    let minus: Vec<WaveOperatorResult> = results.iter().filter(|r| r.sign == Sign::Minus).cloned().collect();
    let cp = completeness_check(&plus, &bound);
    let cm = completeness_check(&minus, &bound);
    let worse = if rank(cm.verdict) > rank(cp.verdict) { cm } else { cp };

    let mut s = Section::new("wave-op");
    s.line(format!(
        "two-sided operator, {} inputs, T = {:?}, test window inner [{}, {}]",
        inputs.len(),
        times,
        num(fw.inner.0),
        num(fw.inner.1)
    ));
    s.line("sign  input_norm  pac_norm  isometry_defect  intertwining_residual  cauchy_defects");
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        s.line(format!(
            "{:?}  {:.6e}  {:.6e}  {:.3e}  {:.3e}  {:?}",
            r.sign,
            r.input_norm,
            r.pac_norm,
            r.isometry_defect,
            r.intertwining_residual,
            r.cauchy_defects.iter().map(|c| format!("{c:.3e}")).collect::<Vec<_>>()
        ));
        for (k, c) in r.cauchy_defects.iter().enumerate() {
            rows.push(vec![(i / 2) as f64, if r.sign == Sign::Plus { 1.0 } else { -1.0 }, times[k + 1], *c]);
        }
    }
    s.line(format!("bound states: {:?}", bound.iter().map(|e| num(e.value)).collect::<Vec<_>>()));
    s.line(format!(
        "completeness: {} (gram defect {:.3e}, bound-state overlap {:.3e}, worst Cauchy {:.3e}) {}",
        worse.verdict, worse.gram_defect, worse.bound_state_overlap, worse.worst_cauchy, worse.note
    ));
    if worse.verdict == Completeness::Inconclusive {
        s.inconclusive(worse.note.clone());
    }
    s.file("wave-op.csv", csv(&["input", "sign", "t", "cauchy_defect"], rows));
    s.set_data(&WaveData {
        results: &results,
        bound_states: bound.iter().map(EigRecord::from).collect(),
        completeness: worse,
    });
    Ok(s)
}

fn rank(c: Completeness) -> u8 {
    match c {
        Completeness::Pass => 0,
        Completeness::Inconclusive => 1,
        Completeness::Fail => 2,
    }
}

/// Bands, thresholds, essential spectrum, gap eigenvalues, classification,
/// Mourre checks, resolvent probes and the threshold set.
fn full_report(cfg: &RunConfig) -> Vec<Section> {
    let mut out = Vec::new();
    let (b, kappa) = match band_data(cfg) {
        Ok(x) => x,
        Err(e) => return vec![Section::failed("bands", e)],
    };
    let mut s = Section::new("bands");
    bands_into(&mut s, &b);
    out.push(s);
    let mut s = Section::new("spectrum");
    spectrum_into(&mut s, &b, &kappa);
    out.push(s);

    let model = cfg.model();
    let mut eigenvalues = Vec::new();
    out.push(match all_gaps(&model, &b, cfg.half_length) {
        Ok(gaps) => {
            let found = certified(&model, &gaps, cfg.half_length, &eig_options(cfg));
            let mut s = Section::new("gap-eigs");
            if found.iter().all(|r| r.1.is_err()) {
                let (_, e) = found.into_iter().next().expect("at least one gap");
                Section::failed("gap-eigs", e.err().expect("all failed"))
            } else {
                eigenvalues = gap_eigs_into(&mut s, &model, cfg.half_length, found);
                s
            }
        }
        Err(e) => Section::failed("gap-eigs", e),
    });

    out.push(match cfg.perturbation {
        Some(_) => classify_task(cfg).unwrap_or_else(|e| Section::failed("classify", e)),
        None => Section::skipped("classify", "no perturbation"),
    });

    let laurent = cfg.laurent_model();
    let seed = mourre_seed(cfg);
    let mut s = Section::new("mourre-check");
    s.line(format!(
        "two-sided operator, seed half-length {seed}, middle third of each sorted band away from the critical set"
    ));
    let mut reports = Vec::new();
    let mut failures = 0;
    let thirds = band_thirds(&b, &kappa);
    for d in &thirds {
        let r = mourre_options(&laurent, *d, seed).and_then(|o| mourre_check(&laurent, *d, seed, &o).at("mourre", "mourre_check"));
        match r {
            Ok(r) => {
                mourre_line(&mut s, &r);
                reports.push(r);
            }
            Err(e) => {
                s.line(format!("delta ({}, {}): error: {e}", num(d.0), num(d.1)));
                s.inconclusive("some intervals failed");
                failures += 1;
            }
        }
    }
    s.set_data(&reports);
    out.push(if thirds.is_empty() {
        Section::skipped("mourre-check", "no dispersive band")
    } else if failures == thirds.len() {
        s.status = Status::Failed {
            module: "mourre".into(),
            operation: "mourre_check".into(),
            message: "every band interval failed".into(),
        };
        s
    } else {
        s
    });

    let mut s = Section::new("lap-sweep");
    let energies = band_energies(&b);
    let mu_min = mu_floor(&model.window(cfg.half_length));
    let admissible = default_mu_grid().iter().filter(|m| **m >= mu_min * (1.0 - 1e-12)).count();
    out.push(if energies.is_empty() {
        Section::skipped("lap-sweep", "no dispersive band")
    } else if admissible < 2 {
        Section::skipped(
            "lap-sweep",
            format!("window too small: the mu floor {mu_min:e} leaves fewer than two sweep values"),
        )
    } else {
        match lap_into(&mut s, &model, cfg, &energies) {
            Ok(()) => s,
            Err(e) => Section::failed("lap-sweep", e),
        }
    });

    let mut s = Section::new("thresholds");
    let mut tau: Vec<f64> = kappa.values();
    tau.extend(&eigenvalues);
    tau.sort_by(f64::total_cmp);
    tau.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    s.line(format!(
        "tau = critical set U certified eigenvalues = {{{}}}",
        tau.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", ")
    ));
    s.set_data(&serde_json::json!({ "tau": tau, "critical": kappa.values(), "eigenvalues": eigenvalues }));
    out.push(s);
    out
}

/// Process exit status for a finished run.
pub fn exit_code(task: Task, sections: &[Section]) -> i32 {
    let failed = |s: &Section| matches!(s.status, Status::Failed { .. });
    let counted: Vec<&Section> = sections.iter().filter(|s| !matches!(s.status, Status::Skipped { .. })).collect();
    let all_failed = !counted.is_empty() && counted.iter().all(|s| failed(s));
    if (task == Task::FullReport && all_failed) || (task != Task::FullReport && sections.iter().any(failed)) {
        3
    } else if sections
        .iter()
        .any(|s| failed(s) || matches!(s.status, Status::Inconclusive { .. }))
    {
        4
    } else {
        0
    }
}
