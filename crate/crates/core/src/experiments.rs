//! Experiment harness: exact censuses, density fits, walk-weight checks and report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::automata::{
    find_stable_representative, forbidden_subword_automaton, nf_recognizer, separator_words, GroupAutomaton,
};
use crate::error::{Error, Result};
use crate::forms::{classify_form, GroupSpec, Kind, Side};
use crate::measures::{
    census_cells, cesaro_factor_masses, cesaro_row, fit_decay, parity_mass, Axes, CensusCell, DecayFit, DensityGrid,
    Direction, FactorCensus, GridCell, MeasureParams, ThetaDist, ThetaDomain, ThetaKind,
};
use crate::samplers::{rg, FormParams, RejectionStats, RngStream};
use crate::stratify::CensusRecord;
use crate::subgraph::Index;

pub const MAX_N: usize = 8;
pub const MAX_K: usize = 8;
pub const MAX_SAMPLES: u64 = 10_000_000;

/// Largest fitted decay rate accepted as exponential decay.
pub const DELTA_MAX: f64 = 0.95;
pub const QUALITY_MIN: f64 = 0.9;
/// Largest allowed difference between decay rates fitted along different directions.
pub const SPREAD_MAX: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Census,
    SampleSweep,
    DensityDecay,
    WalkDecay,
    GraphExport,
}

impl ExperimentKind {
    pub fn needs_seed(self) -> bool {
        matches!(self, ExperimentKind::SampleSweep | ExperimentKind::DensityDecay | ExperimentKind::WalkDecay)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub spec_path: Option<PathBuf>,
    pub n_max: usize,
    pub k_max: usize,
    pub mean_lengths: Vec<f64>,
    pub samples: u64,
    pub seed: Option<u64>,
    pub radius: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            spec_path: None,
            n_max: 6,
            k_max: 8,
            mean_lengths: vec![2.0, 4.0, 8.0],
            samples: 100_000,
            seed: None,
            radius: None,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.needs_seed() && self.seed.is_none() {
            return Err(Error::Config("a seed is required for sampling experiments".into()));
        }
        if self.n_max == 0 || self.k_max == 0 {
            return Err(Error::Config("n_max and k_max must be positive".into()));
        }
        if self.mean_lengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::Config("mean lengths must be positive".into()));
        }
        if self.n_max > MAX_N {
            return Err(Error::Guard(format!("n_max = {} exceeds {MAX_N}", self.n_max)));
        }
        if self.k_max > MAX_K {
            return Err(Error::Guard(format!("k_max = {} exceeds {MAX_K}", self.k_max)));
        }
        if self.samples > MAX_SAMPLES {
            return Err(Error::Guard(format!("{} samples exceeds {MAX_SAMPLES}", self.samples)));
        }
        Ok(())
    }

    pub fn load_spec(&self) -> Result<GroupSpec> {
        let path = self.spec_path.as_ref().ok_or_else(|| Error::Config("no spec file given".into()))?;
        GroupSpec::from_file(path, self.radius)
    }

    /// SHA-256 of the spec text and the settings that affect results.
    pub fn fingerprint(&self, spec: &GroupSpec) -> String {
        let mut h = Sha256::new();
        h.update(spec.canonical_text().as_bytes());
        h.update(
            format!(
                "{:?} n={} k={} l={:?} N={} seed={:?} R={:?}",
                self.kind, self.n_max, self.k_max, self.mean_lengths, self.samples, self.seed, self.radius
            )
            .as_bytes(),
        );
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Writes `(name, contents)` pairs into `dir`.
pub fn write_files(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, body)| {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            Ok(p)
        })
        .collect()
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::A => "A",
        Side::B => "B",
    }
}

fn kind_file(kind: Kind) -> String {
    kind.name().to_lowercase()
}

#[derive(Debug, Clone)]
pub struct CensusOutput {
    pub strata: Vec<(Side, Vec<CensusRecord>)>,
    pub cells: Vec<(Kind, Vec<CensusCell>)>,
}

impl CensusOutput {
    pub fn cells_of(&self, kind: Kind) -> &[CensusCell] {
        self.cells.iter().find(|(k, _)| *k == kind).map_or(&[], |(_, c)| c)
    }

    pub fn grid(&self, kind: Kind) -> DensityGrid {
        DensityGrid::from_census(self.cells_of(kind))
    }

    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (side, recs) in &self.strata {
            let mut s = format!("{}\n", CensusRecord::CSV_HEADER);
            for r in recs {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            out.push((format!("strata_{}.csv", side_name(*side)), s));
        }
        for (kind, cells) in &self.cells {
            let mut s = format!("{}\n", CensusCell::CSV_HEADER);
            for c in cells {
                s.push_str(&c.csv_row());
                s.push('\n');
            }
            out.push((format!("census_{}.csv", kind_file(*kind)), s));
            out.push((format!("grid_{}.csv", kind_file(*kind)), DensityGrid::from_census(cells).to_csv()));
        }
        out
    }
}

/// Exact cardinality census of every form kind over `1 ≤ n ≤ n_max`, `0 ≤ k ≤ k_max`.
pub fn run_census(cfg: &ExperimentConfig, spec: &GroupSpec) -> Result<CensusOutput> {
    cfg.validate()?;
    let mut strata = Vec::new();
    for side in [Side::A, Side::B] {
        let st = spec.stratifier(side);
        let recs = (0..=cfg.n_max).map(|n| st.stratify_sphere(n, MAX_N)).collect::<Result<Vec<_>>>()?;
        strata.push((side, recs));
    }
    let ca = FactorCensus::build(spec, Side::A, cfg.n_max)?;
    let cb = FactorCensus::build(spec, Side::B, cfg.n_max)?;
    let cells = Kind::ALL
        .iter()
        .map(|&kind| Ok((kind, census_cells(kind, &ca, &cb, cfg.n_max, cfg.k_max)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CensusOutput { strata, cells })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionFit {
    pub direction: Direction,
    pub points: Vec<(f64, f64)>,
    pub fit: Option<DecayFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KindDecay {
    pub kind: Kind,
    pub fits: Vec<DirectionFit>,
    /// Largest pairwise difference of the fitted rates.
    pub spread: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CesaroRow {
    pub kind: Kind,
    pub l: f64,
    /// Per-factor `(denominator, numerator)` masses.
    pub masses: [(f64, f64); 2],
    /// `rho[k-1] = ρ^{l,k}`.
    pub rho: Vec<f64>,
    pub q: Option<f64>,
    pub decreasing: bool,
    pub bounded: bool,
}

impl CesaroRow {
    pub fn pass(&self) -> bool {
        self.decreasing && self.bounded && self.q.is_some_and(|q| q < 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloRow {
    pub kind: Kind,
    pub k: usize,
    pub samples: u64,
    pub unstable: u64,
    /// Exact probability under the same measure, where one is available.
    pub predicted: Option<f64>,
}

impl MonteCarloRow {
    pub fn fraction(&self) -> f64 {
        self.unstable as f64 / self.samples.max(1) as f64
    }

    /// Distance from the prediction in standard deviations.
    pub fn z_score(&self) -> Option<f64> {
        let p = self.predicted?;
        let sd = (p * (1.0 - p) / self.samples as f64).sqrt();
        Some(if sd == 0.0 {
            if (self.fraction() - p).abs() < 1e-12 { 0.0 } else { f64::INFINITY }
        } else {
            (self.fraction() - p) / sd
        })
    }
}

#[derive(Debug, Clone)]
pub struct DensityReport {
    pub fingerprint: String,
    pub seed: u64,
    pub decays: Vec<KindDecay>,
    pub cesaro: Vec<CesaroRow>,
    pub monte_carlo: Vec<MonteCarloRow>,
    pub notes: Vec<String>,
}

impl DensityReport {
    pub fn pass(&self) -> bool {
        self.decays.iter().all(|d| d.pass) && self.cesaro.iter().all(|c| c.pass())
    }

    pub fn render(&self) -> String {
        let mut s = format!("density report\nspec-config sha256 {}\nseed {}\n", self.fingerprint, self.seed);
        for d in &self.decays {
            let _ = writeln!(s, "decay {} spread {:.4} {}", d.kind.name(), d.spread, verdict(d.pass));
            for f in &d.fits {
                match f.fit {
                    Some(fit) => {
                        let _ = writeln!(s, "  {} delta {:.6} quality {:.4} points {}", f.direction.name(), fit.delta, fit.quality, fit.used);
                    }
                    None => {
                        let _ = writeln!(s, "  {} no fit", f.direction.name());
                    }
                }
            }
        }
        for c in &self.cesaro {
            let rho: Vec<String> = c.rho.iter().map(|r| format!("{r:.3e}")).collect();
            let _ = writeln!(
                s,
                "cesaro {} l {} q {} decreasing {} bounded {} rho {}",
                c.kind.name(),
                c.l,
                c.q.map_or("-".into(), |q| format!("{q:.6}")),
                c.decreasing,
                c.bounded,
                rho.join(" ")
            );
        }
        for m in &self.monte_carlo {
            let _ = writeln!(
                s,
                "sample {} k {} n {} unstable {} fraction {:.6} predicted {} z {}",
                m.kind.name(),
                m.k,
                m.samples,
                m.unstable,
                m.fraction(),
                m.predicted.map_or("-".into(), |p| format!("{p:.6}")),
                m.z_score().map_or("-".into(), |z| format!("{z:.2}"))
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note {n}");
        }
        let _ = writeln!(s, "result {}", verdict(self.pass()));
        s
    }

    pub fn cesaro_csv(&self, kind: Kind) -> String {
        let cells = self
            .cesaro
            .iter()
            .filter(|c| c.kind == kind)
            .flat_map(|c| {
                (1..=c.rho.len()).map(move |k| {
                    let [(ta, qa), (tb, qb)] = c.masses;
                    GridCell {
                        axis1: c.l,
                        k,
                        numerator: parity_mass(qa, qb, k),
                        denominator: parity_mass(ta, tb, k),
                        exact: None,
                        rho: Some(c.rho[k - 1]),
                    }
                })
            })
            .collect();
        DensityGrid { axes: Axes::MeanCount, cells }.to_csv()
    }

    pub fn files(&self) -> Vec<(String, String)> {
        let mut out = vec![("density_report.txt".to_string(), self.render())];
        for kind in [Kind::EF, Kind::RF] {
            if self.cesaro.iter().any(|c| c.kind == kind) {
                out.push((format!("cesaro_{}.csv", kind_file(kind)), self.cesaro_csv(kind)));
            }
        }
        let mut mc = String::from("kind,k,samples,unstable,fraction,predicted\n");
        for m in &self.monte_carlo {
            let _ = writeln!(
                mc,
                "{},{},{},{},{:e},{}",
                m.kind.name(),
                m.k,
                m.samples,
                m.unstable,
                m.fraction(),
                m.predicted.map(|p| format!("{p:e}")).unwrap_or_default()
            );
        }
        out.push(("samples.csv".to_string(), mc));
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Fits the decay of `ρ^{n,k}` in k along every direction.
pub fn decay_along_directions(kind: Kind, grid: &DensityGrid, n_max: usize, k_max: usize) -> KindDecay {
    let fits: Vec<DirectionFit> = Direction::ALL
        .iter()
        .map(|&d| {
            let points = grid.slice(d, n_max, k_max);
            let fit = fit_decay(&points).ok();
            DirectionFit { direction: d, points, fit }
        })
        .collect();
    let deltas: Vec<f64> = fits.iter().filter_map(|f| f.fit.map(|x| x.delta)).collect();
    let mut spread: f64 = 0.0;
    for a in &deltas {
        for b in &deltas {
            spread = spread.max((a - b).abs());
        }
    }
    let pass = fits.len() >= 3
        && fits.iter().all(|f| f.fit.is_some_and(|x| x.delta <= DELTA_MAX && x.quality >= QUALITY_MIN))
        && spread <= SPREAD_MAX;
    KindDecay { kind, fits, spread, pass }
}

/// `ρ^{l,k}` rows for the elementary and reduced families, fitted in k.
pub fn cesaro_rows(spec: &GroupSpec, mean_lengths: &[f64], k_max: usize) -> Result<Vec<CesaroRow>> {
    let strata = [Side::A, Side::B]
        .iter()
        .map(|&side| {
            let st = spec.stratifier(side);
            st.coset_strata(st.radius())
        })
        .collect::<Result<Vec<_>>>()?;
    if strata.iter().any(|s| !s.exact) {
        return Err(Error::Inconclusive("coset strata are not exact; masses cannot be computed".into()));
    }
    let mut rows = Vec::new();
    for kind in [Kind::EF, Kind::RF] {
        for &l in mean_lengths {
            let mut masses = [(0.0, 0.0); 2];
            for (i, side) in [Side::A, Side::B].into_iter().enumerate() {
                let p = MeasureParams::from_mean_length(l, spec.alphabet(side).rank)?;
                masses[i] = cesaro_factor_masses(kind, spec.transversal(side), &strata[i], &p, 600)?;
            }
            let rho = cesaro_row(masses[0], masses[1], k_max);
            let even: Vec<(f64, f64)> = (1..=k_max / 2).map(|t| (t as f64, rho[2 * t - 1])).collect();
            let q = fit_decay(&even).ok().map(|f| f.delta);
            let decreasing = (2..k_max).all(|k| rho[k] < rho[k - 1]);
            let bounded = q.is_some_and(|q| {
                (1..=k_max).all(|k| rho[k - 1] <= q.powi((k / 2) as i32 - 1) * (1.0 + 1e-9))
            });
            rows.push(CesaroRow { kind, l, masses, rho, q, decreasing, bounded });
        }
    }
    Ok(rows)
}

/// Samples `n` forms of each syllable count and counts the unstable ones, in parallel chunks.
pub fn sample_unstable(
    spec: &GroupSpec,
    kind: Kind,
    k: usize,
    n: u64,
    params: &FormParams,
    master: &RngStream,
    task: u64,
) -> Result<MonteCarloRow> {
    const CHUNK: u64 = 5_000;
    let chunks = n.div_ceil(CHUNK);
    let theta = ThetaDist::new(ThetaKind::Fixed(k), ThetaDomain::Natural)?;
    let workers = std::thread::available_parallelism().map_or(1, |x| x.get()) as u64;
    let mut counts = vec![None; chunks as usize];
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers.min(chunks))
            .map(|wid| {
                let theta = &theta;
                scope.spawn(move || {
                    let mut mine = Vec::new();
                    let mut c = wid;
                    while c < chunks {
                        let mut rng = master.split(task * 1_000_003 + c);
                        let size = CHUNK.min(n - c * CHUNK);
                        let mut stats = RejectionStats::default();
                        let mut bad = 0u64;
                        let mut res = Ok(());
                        for _ in 0..size {
                            match rg(kind, spec, theta, params, &mut stats, &mut rng) {
                                Ok(nf) => bad += u64::from(classify_form(&nf, spec).unstable()),
                                Err(e) => {
                                    res = Err(e);
                                    break;
                                }
                            }
                        }
                        mine.push((c, res.map(|_| bad)));
                        c += workers;
                    }
                    mine
                })
            })
            .collect();
        for h in handles {
            for (c, r) in h.join().expect("sampling worker panicked") {
                counts[c as usize] = Some(r);
            }
        }
    });
    let mut unstable = 0;
    for c in counts {
        unstable += c.expect("every chunk is assigned")?;
    }
    Ok(MonteCarloRow { kind, k, samples: n, unstable, predicted: None })
}

/// Exact census fits, mass-based rows and Monte Carlo fractions for every form kind.
pub fn run_density_report(cfg: &ExperimentConfig, spec: &GroupSpec) -> Result<DensityReport> {
    cfg.validate()?;
    if spec.infinite_side().is_none() {
        return Err(Error::Precondition("C has finite index in both factors".into()));
    }
    let seed = cfg.seed.expect("validated");
    let census = run_census(cfg, spec)?;
    let decays = Kind::ALL.iter().map(|&k| decay_along_directions(k, &census.grid(k), cfg.n_max, cfg.k_max)).collect();
    let mut notes = Vec::new();
    let cesaro = match cesaro_rows(spec, &cfg.mean_lengths, cfg.k_max) {
        Ok(rows) => rows,
        Err(e) => {
            notes.push(format!("mass rows skipped: {e}"));
            Vec::new()
        }
    };
    let master = RngStream::new(seed);
    let mut monte_carlo = Vec::new();
    let both_infinite = [Side::A, Side::B].iter().all(|&s| spec.index(s) == Index::Infinite);
    let l = cfg.mean_lengths.first().copied().unwrap_or(4.0);
    let params = FormParams::uniform(spec, 1.0 / (l + 1.0))?;
    let per_k = (cfg.samples / (cfg.k_max as u64 * 4)).max(1);
    for (ki, &kind) in Kind::ALL.iter().enumerate() {
        if kind != Kind::EF && !both_infinite {
            notes.push(format!("{} sampling skipped: a factor has C of finite index", kind.name()));
            continue;
        }
        for k in 1..=cfg.k_max {
            if kind == Kind::CRF && k > 1 && k % 2 == 1 {
                continue;
            }
            let mut row = sample_unstable(spec, kind, k, per_k, &params, &master, (ki * 100 + k) as u64)?;
            if kind == Kind::EF {
                if let Some(c) = cesaro.iter().find(|c| c.kind == Kind::EF && c.l == l) {
                    row.predicted = Some(c.rho[k - 1]);
                }
            }
            monte_carlo.push(row);
        }
    }
    Ok(DensityReport { fingerprint: cfg.fingerprint(spec), seed, decays, cesaro, monte_carlo, notes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub kind: Kind,
    /// `f′_n(NF_uns, NF)` for `n = 0..=n_max`.
    pub unstable: Vec<f64>,
    /// `f′_n(NF, NF)`.
    pub sanity: Vec<f64>,
    pub fit: Option<DecayFit>,
    pub samples: u64,
    pub violations: u64,
}

impl LambdaRow {
    pub fn decays(&self) -> bool {
        self.fit.is_some_and(|f| f.delta <= DELTA_MAX && f.quality >= QUALITY_MIN)
    }
}

#[derive(Debug, Clone)]
pub struct WalkReport {
    pub fingerprint: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub separator: Option<(Side, String)>,
    pub patterns: usize,
    pub forbidden_states: usize,
    pub rows: Vec<LambdaRow>,
    pub notes: Vec<String>,
}

impl WalkReport {
    pub fn render(&self) -> String {
        let mut s = format!("walk report\nspec-config sha256 {}\nseed {}\n", self.fingerprint, self.seed);
        match &self.separator {
            Some((side, w)) => {
                let _ = writeln!(s, "stable representative {w} in {}", side_name(*side));
                let _ = writeln!(s, "forbidden words {} automaton states {}", self.patterns, self.forbidden_states);
            }
            None => s.push_str("stable representative none\n"),
        }
        for r in &self.rows {
            let f: Vec<String> = r.unstable.iter().map(|x| format!("{x:.3e}")).collect();
            let sanity: Vec<String> = r.sanity.iter().map(|x| format!("{x:.6}")).collect();
            let _ = writeln!(s, "lambda {} unstable {}", r.kind.name(), f.join(" "));
            let _ = writeln!(s, "lambda {} whole {}", r.kind.name(), sanity.join(" "));
            match r.fit {
                Some(fit) => {
                    let _ = writeln!(s, "fit {} delta {:.6} quality {:.4}", r.kind.name(), fit.delta, fit.quality);
                }
                None => {
                    let _ = writeln!(s, "fit {} none", r.kind.name());
                }
            }
            let _ = writeln!(s, "containment {} samples {} violations {}", r.kind.name(), r.samples, r.violations);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note {n}");
        }
        let v = match self.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        };
        let _ = writeln!(s, "result {v}");
        s
    }
}

/// Walk-weight decay of the unstable forms and their containment in the separator-free words.
pub fn run_walk_report(cfg: &ExperimentConfig, spec: &GroupSpec) -> Result<WalkReport> {
    cfg.validate()?;
    let seed = cfg.seed.expect("validated");
    let fingerprint = cfg.fingerprint(spec);
    let max_len = cfg.radius.unwrap_or(6).max(1);
    let (side, s) = match find_stable_representative(spec, max_len) {
        Ok(x) => x,
        Err(Error::Inconclusive(msg)) => {
            return Ok(WalkReport {
                fingerprint,
                seed,
                verdict: Verdict::Inconclusive,
                separator: None,
                patterns: 0,
                forbidden_states: 0,
                rows: Vec::new(),
                notes: vec![msg],
            })
        }
        Err(e) => return Err(e),
    };
    let pats = separator_words(spec, side, &s);
    let f0 = forbidden_subword_automaton(vec![spec.alphabet(Side::A), spec.alphabet(Side::B)], &pats)?;
    let mut rng = RngStream::new(seed);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for kind in [Kind::EF, Kind::RF, Kind::CNF] {
        let (whole, uns) = match (nf_recognizer(spec, kind, false), nf_recognizer(spec, kind, true)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                notes.push(format!("{} skipped: {e}", kind.name()));
                continue;
            }
        };
        let unstable = whole.f_prime(&uns, cfg.n_max)?;
        let sanity = whole.f_prime(&whole, cfg.n_max)?;
        let pts: Vec<(f64, f64)> = unstable.iter().enumerate().skip(1).map(|(n, &v)| (n as f64, v)).collect();
        let fit = fit_decay(&pts).ok();
        let n = cfg.samples.min(MAX_SAMPLES);
        let violations = containment_violations(&uns, &f0, n, &mut rng);
        rows.push(LambdaRow { kind, unstable, sanity, fit, samples: n, violations });
    }
    let required: Vec<&LambdaRow> = rows.iter().filter(|r| matches!(r.kind, Kind::EF | Kind::RF)).collect();
    let verdict = if required.len() == 2 && rows.iter().all(|r| r.violations == 0) && required.iter().all(|r| r.decays()) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(WalkReport {
        fingerprint,
        seed,
        verdict,
        separator: Some((side, s.render())),
        patterns: pats.len(),
        forbidden_states: f0.state_count(),
        rows,
        notes,
    })
}

/// Random words of `lang` not accepted by `f0`.
pub fn containment_violations(lang: &GroupAutomaton, f0: &GroupAutomaton, n: u64, rng: &mut RngStream) -> u64 {
    (0..n).filter(|_| !f0.accepts(&lang.sample_word(0.1, 40, rng))).count() as u64
}

/// One sampled form per line, preceded by a `#` header.
pub fn run_sample(cfg: &ExperimentConfig, spec: &GroupSpec, kind: Kind, s: f64) -> Result<String> {
    cfg.validate()?;
    let seed = cfg.seed.expect("validated");
    let domain = if kind == Kind::CRF { ThetaDomain::EvenOrOne } else { ThetaDomain::Natural };
    let theta = ThetaDist::new(ThetaKind::Geometric(0.5), domain)?;
    let params = FormParams::uniform(spec, s)?;
    let mut rng = RngStream::new(seed);
    let mut stats = RejectionStats::default();
    let mut out = format!(
        "# kind={} seed={seed} s={s} theta={:?} spec={}\n",
        kind.name(),
        theta,
        cfg.fingerprint(spec)
    );
    for _ in 0..cfg.samples {
        let nf = rg(kind, spec, &theta, &params, &mut stats, &mut rng)?;
        out.push_str(&nf.render());
        out.push('\n');
    }
    Ok(out)
}

/// DOT and text dumps of both subgroup graphs.
pub fn graph_export(spec: &GroupSpec) -> Vec<(String, String)> {
    let mut out = Vec::new();
    for side in [Side::A, Side::B] {
        let g = spec.transversal(side).graph();
        out.push((format!("graph_{}.dot", side_name(side)), g.to_dot()));
        out.push((format!("graph_{}.txt", side_name(side)), g.to_text()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> GroupSpec {
        GroupSpec::parse("rank_a = 2\nrank_b = 2\nrank_c = 1\nu_z = a a\nv_z = x x x\n", None).unwrap()
    }

    #[test]
    fn config_guards() {
        let mut c = ExperimentConfig::new(ExperimentKind::SampleSweep);
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        c.seed = Some(1);
        assert!(c.validate().is_ok());
        c.n_max = 9;
        assert!(matches!(c.validate(), Err(Error::Guard(_))));
        c.n_max = 4;
        c.samples = MAX_SAMPLES + 1;
        assert!(matches!(c.validate(), Err(Error::Guard(_))));
        assert!(ExperimentConfig::new(ExperimentKind::Census).validate().is_ok());
    }

    #[test]
    fn census_files_and_k0() {
        let mut c = ExperimentConfig::new(ExperimentKind::Census);
        c.n_max = 3;
        c.k_max = 3;
        let spec = reference();
        let out = run_census(&c, &spec).unwrap();
        for (_, cells) in &out.cells {
            for cell in cells.iter().filter(|c| c.k == 0) {
                assert_eq!((cell.total, cell.unstable), (1, 1));
            }
        }
        let files = out.files();
        let names: Vec<&str> = files.iter().map(|f| f.0.as_str()).collect();
        assert!(names.contains(&"strata_A.csv") && names.contains(&"grid_cnf.csv") && names.contains(&"census_crf.csv"));
        let again = run_census(&c, &spec).unwrap().files();
        assert_eq!(files, again);
    }

    #[test]
    fn fingerprint_is_stable() {
        let spec = reference();
        let mut c = ExperimentConfig::new(ExperimentKind::WalkDecay);
        c.seed = Some(5);
        let a = c.fingerprint(&spec);
        assert_eq!(a.len(), 64);
        assert_eq!(a, c.fingerprint(&spec));
        c.seed = Some(6);
        assert_ne!(a, c.fingerprint(&spec));
    }

    #[test]
    fn walk_report_small() {
        let spec = reference();
        let mut c = ExperimentConfig::new(ExperimentKind::WalkDecay);
        c.seed = Some(1);
        c.samples = 2_000;
        c.n_max = 8;
        let r = run_walk_report(&c, &spec).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{}", r.render());
        let ef = r.rows.iter().find(|r| r.kind == Kind::EF).unwrap();
        assert!(ef.sanity.iter().all(|&x| (x - 1.0).abs() < 1e-12));
    }

    #[test]
    fn walk_report_inconclusive_without_stable_rep() {
        let spec = GroupSpec::parse(
            "rank_a = 2\nrank_b = 2\nrank_c = 3\nu_z = a a\nu_z = b\nu_z = a b A\nv_z = x x\nv_z = y\nv_z = x y X\n",
            None,
        )
        .unwrap();
        let mut c = ExperimentConfig::new(ExperimentKind::WalkDecay);
        c.seed = Some(1);
        let r = run_walk_report(&c, &spec).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn sample_dump_reproduces() {
        let spec = reference();
        let mut c = ExperimentConfig::new(ExperimentKind::SampleSweep);
        c.seed = Some(3);
        c.samples = 50;
        let a = run_sample(&c, &spec, Kind::CNF, 0.3).unwrap();
        assert_eq!(a, run_sample(&c, &spec, Kind::CNF, 0.3).unwrap());
        assert_eq!(a.lines().count(), 51);
        assert!(a.starts_with("# kind=cnf seed=3"));
    }
}
