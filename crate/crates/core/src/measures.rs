//! Measures on free groups and on sets of normal forms, and density grids.

use rand::Rng;

use crate::error::{Error, Result};
use crate::forms::{Kind, Side, GroupSpec};
use crate::stratify::{CosetStrata, Stability};
use crate::subgraph::{Index, Trace, Transversal};
use crate::words::{enumerate_ball, sphere_count, sphere_count_f64, Word};

/// Stop probability `s` of the no-return walk and the rank of the free group it walks on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureParams {
    s: f64,
    rank: u32,
}

impl MeasureParams {
    pub fn new(s: f64, rank: u32) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("stop probability {s} must lie in (0, 1)")));
        }
        if rank == 0 {
            return Err(Error::Domain("rank must be positive".into()));
        }
        Ok(MeasureParams { s, rank })
    }

    /// Parameters with mean word length `l = 1/s − 1`.
    pub fn from_mean_length(l: f64, rank: u32) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Domain(format!("mean length {l} must be positive")));
        }
        MeasureParams::new(1.0 / (l + 1.0), rank)
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn l(&self) -> f64 {
        1.0 / self.s - 1.0
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }
}

/// μ_s of any single word of length n.
pub fn mu_s_len(n: usize, p: &MeasureParams) -> f64 {
    p.s * (1.0 - p.s).powi(n as i32) / sphere_count_f64(p.rank, n)
}

pub fn mu_s(g: &Word, p: &MeasureParams) -> f64 {
    mu_s_len(g.len(), p)
}

/// μ_s conditioned on the word being nontrivial.
pub fn mu_s_nontrivial(g: &Word, p: &MeasureParams) -> f64 {
    if g.is_empty() {
        0.0
    } else {
        mu_s(g, p) / (1.0 - p.s)
    }
}

/// Number of prefixes of `w` (including ε and `w`) whose path ends at the base of Γ.
pub fn base_visits(w: &Word, t: &Transversal) -> usize {
    let g = t.graph();
    let mut v = Some(0);
    let mut m = 1;
    for &l in w.letters() {
        v = v.and_then(|x| g.step(x, l));
        match v {
            Some(0) => m += 1,
            Some(_) => {}
            None => break,
        }
    }
    m
}

/// Number of letters read before the path of `w` leaves Γ, or None if it never does.
pub fn exit_position(w: &Word, t: &Transversal) -> Option<usize> {
    match t.graph().trace(w.letters()) {
        Trace::Inside { .. } => None,
        Trace::Left { pos, .. } => Some(pos),
    }
}

fn check_relative(w: &Word, t: &Transversal, p: &MeasureParams) -> Result<()> {
    if w.alphabet() != t.alphabet() || p.rank != t.alphabet().rank {
        return Err(Error::AlphabetMismatch("word, transversal and parameters disagree on the factor".into()));
    }
    if let Index::Finite(_) = t.graph().index() {
        return Err(Error::Unsupported("the relative measure needs a subgroup of infinite index".into()));
    }
    if t.graph().accepts(w.letters()) {
        return Err(Error::Domain(format!("{w} lies in the subgroup")));
    }
    Ok(())
}

/// The closed form `(1/2r)·((1−s)/(2r−1))^{|w|−m_w}·(2r−1)^{1−m_w}` with `m_w` the base visits.
pub fn mu_s_relative(w: &Word, t: &Transversal, p: &MeasureParams) -> Result<f64> {
    check_relative(w, t, p)?;
    let r = p.rank as f64;
    let m = base_visits(w, t) as i32;
    let n = w.len() as i32;
    Ok((1.0 / (2.0 * r)) * ((1.0 - p.s) / (2.0 * r - 1.0)).powi(n - m) / (2.0 * r - 1.0).powi(m - 1))
}

/// Exact probability that the walk which never stops inside Γ ends at `w`.
pub fn walk_law(w: &Word, t: &Transversal, p: &MeasureParams) -> Result<f64> {
    check_relative(w, t, p)?;
    Ok(match exit_position(w, t) {
        None => 0.0,
        Some(i) => p.s * (1.0 - p.s).powi((w.len() - i - 1) as i32) / sphere_count_f64(p.rank, w.len()),
    })
}

/// Walk-law mass of the coset `C·rep(v)·u` where `u` has length `tail` and leaves Γ at `v`.
pub fn walk_coset_mass(t: &Transversal, v: usize, tail: usize, p: &MeasureParams, depth: usize) -> f64 {
    let probs = t.graph().path_probs(depth);
    let r = p.rank;
    let sum: f64 = (0..=depth)
        .map(|j| probs[j][v] * sphere_count_f64(r, j) / sphere_count_f64(r, j + tail))
        .sum();
    p.s * (1.0 - p.s).powi(tail as i32 - 1) * sum
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaKind {
    /// `6/(π²j²)` on the j-th point of the domain, counting from 1.
    Zeta2,
    Geometric(f64),
    Uniform(usize),
    /// All mass on one syllable count; the domain is ignored.
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaDomain {
    /// k = 0, 1, 2, ...
    Natural,
    /// k = 1, 2, 3, ...
    Positive,
    /// k = 1, 2, 4, 6, ...
    EvenOrOne,
}

/// Distribution of the syllable count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaDist {
    pub kind: ThetaKind,
    pub domain: ThetaDomain,
}

impl ThetaDist {
    pub fn new(kind: ThetaKind, domain: ThetaDomain) -> Result<Self> {
        match kind {
            ThetaKind::Geometric(q) if !(q > 0.0 && q <= 1.0) => {
                Err(Error::Domain(format!("geometric parameter {q} must lie in (0, 1]")))
            }
            ThetaKind::Uniform(0) => Err(Error::Domain("uniform support must be nonempty".into())),
            _ => Ok(ThetaDist { kind, domain }),
        }
    }

    fn index_pmf(&self, j: usize) -> f64 {
        match self.kind {
            ThetaKind::Zeta2 => 6.0 / (std::f64::consts::PI.powi(2) * ((j + 1) as f64).powi(2)),
            ThetaKind::Geometric(q) => q * (1.0 - q).powi(j as i32),
            ThetaKind::Fixed(_) => 0.0,
            ThetaKind::Uniform(k) => {
                if j < k {
                    1.0 / k as f64
                } else {
                    0.0
                }
            }
        }
    }

    /// Syllable count of the j-th domain point.
    pub fn k_of(&self, j: usize) -> usize {
        match self.domain {
            ThetaDomain::Natural => j,
            ThetaDomain::Positive => j + 1,
            ThetaDomain::EvenOrOne => {
                if j == 0 {
                    1
                } else {
                    2 * j
                }
            }
        }
    }

    pub fn index_of(&self, k: usize) -> Option<usize> {
        match self.domain {
            ThetaDomain::Natural => Some(k),
            ThetaDomain::Positive => k.checked_sub(1),
            ThetaDomain::EvenOrOne => match k {
                1 => Some(0),
                k if k >= 2 && k % 2 == 0 => Some(k / 2),
                _ => None,
            },
        }
    }

    pub fn pmf(&self, k: usize) -> f64 {
        if let ThetaKind::Fixed(k0) = self.kind {
            return if k == k0 { 1.0 } else { 0.0 };
        }
        self.index_of(k).map_or(0.0, |j| self.index_pmf(j))
    }

    /// Upper bound on the mass of all k greater than `cutoff`.
    pub fn tail_bound(&self, cutoff: usize) -> f64 {
        if let ThetaKind::Fixed(k0) = self.kind {
            return if cutoff < k0 { 1.0 } else { 0.0 };
        }
        let mut last = None;
        let mut j = 0;
        while self.k_of(j) <= cutoff {
            last = Some(j);
            j += 1;
        }
        let Some(big_j) = last else { return 1.0 };
        match self.kind {
            ThetaKind::Zeta2 => 6.0 / (std::f64::consts::PI.powi(2) * (big_j + 1) as f64),
            ThetaKind::Geometric(q) => (1.0 - q).powi(big_j as i32 + 1),
            ThetaKind::Uniform(k) => {
                if big_j + 1 >= k {
                    0.0
                } else {
                    (k - big_j - 1) as f64 / k as f64
                }
            }
            ThetaKind::Fixed(_) => unreachable!(),
        }
    }

    /// Inverse-CDF draw of a syllable count.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if let ThetaKind::Fixed(k0) = self.kind {
            return k0;
        }
        let u: f64 = rng.gen();
        let j = match self.kind {
            ThetaKind::Uniform(k) => ((u * k as f64) as usize).min(k - 1),
            _ => {
                let mut acc = 0.0;
                let mut j = 0;
                loop {
                    acc += self.index_pmf(j);
                    if u < acc || j >= 100_000_000 {
                        break j;
                    }
                    j += 1;
                }
            }
        };
        self.k_of(j)
    }
}

/// `½·θ(k)·∏ μ(f_i)` for a word of the free product written with `k ≥ 1` syllables.
pub fn mu_free_product(
    f: &[(Side, Word)],
    theta: &ThetaDist,
    mu_a: impl Fn(&Word) -> f64,
    mu_b: impl Fn(&Word) -> f64,
) -> f64 {
    if f.is_empty() {
        return theta.pmf(0);
    }
    let prod: f64 = f
        .iter()
        .map(|(side, w)| match side {
            Side::A => mu_a(w),
            Side::B => mu_b(w),
        })
        .product();
    0.5 * theta.pmf(f.len()) * prod
}

/// `f_n(R, L)`; None when the L-sphere is empty.
pub fn frequency(r: &[u128], l: &[u128], n: usize) -> Option<f64> {
    let den = *l.get(n)?;
    if den == 0 {
        None
    } else {
        Some(*r.get(n)? as f64 / den as f64)
    }
}

/// Ratio of partial sums up to `n`.
pub fn cumulative(r: &[u128], l: &[u128], n: usize) -> Option<f64> {
    let num: f64 = r.iter().take(n + 1).map(|&x| x as f64).sum();
    let den: f64 = l.iter().take(n + 1).map(|&x| x as f64).sum();
    if den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cesaro {
    pub value: f64,
    pub running: Vec<f64>,
    /// Change of the running mean over the second half of the prefix.
    pub drift: f64,
}

/// Running averages `(1/n)·Σ f_i` of a finite prefix of frequencies.
pub fn cesaro_density(freqs: &[f64]) -> Cesaro {
    let mut running = Vec::with_capacity(freqs.len());
    let mut acc = 0.0;
    for (i, f) in freqs.iter().enumerate() {
        acc += f;
        running.push(acc / (i + 1) as f64);
    }
    let value = running.last().copied().unwrap_or(0.0);
    let half = running.get(running.len() / 2).copied().unwrap_or(value);
    Cesaro { value, drift: (value - half).abs(), running }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub delta: f64,
    pub quality: f64,
    pub used: usize,
}

/// Least squares fit of `log value ≈ a + t·log δ`; nonpositive values are skipped.
pub fn fit_decay(series: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = series.iter().filter(|(_, y)| *y > 0.0).map(|&(t, y)| (t, y.ln())).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData(format!("{} positive points, need 4", pts.len())));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if stt == 0.0 {
        return Err(Error::Degenerate("all points share one abscissa".into()));
    }
    let sty: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let icept = my - slope * mt;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - icept - slope * p.0).powi(2)).sum();
    let quality = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(DecayFit { delta: slope.exp(), quality, used: pts.len() })
}

/// Size of the k-syllable free product of per-factor sets of sizes `a` and `b`,
/// over both starting factors. `k = 0` gives 1.
pub fn parity_count(a: u128, b: u128, k: usize) -> Option<u128> {
    let t = (k / 2) as u32;
    let ab = a.checked_mul(b)?.checked_pow(t)?;
    if k == 0 {
        Some(1)
    } else if k % 2 == 0 {
        ab.checked_mul(2)
    } else {
        ab.checked_mul(a.checked_add(b)?)
    }
}

/// Floating point version of [`parity_count`] for masses.
pub fn parity_mass(a: f64, b: f64, k: usize) -> f64 {
    let t = (k / 2) as i32;
    if k == 0 {
        1.0
    } else if k % 2 == 0 {
        2.0 * (a * b).powi(t)
    } else {
        (a * b).powi(t) * (a + b)
    }
}

/// Path through the (n, k) grid, indexed by k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// n = k
    Diagonal,
    /// n = 2k
    HalfN,
    /// n = k²
    Square,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Diagonal, Direction::HalfN, Direction::Square];

    /// Syllable length bound at k, capped at `n_max`.
    pub fn n_of(self, k: usize, n_max: usize) -> usize {
        let n = match self {
            Direction::Diagonal => k,
            Direction::HalfN => 2 * k,
            Direction::Square => k * k,
        };
        n.clamp(1, n_max.max(1))
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Diagonal => "n=k",
            Direction::HalfN => "n=2k",
            Direction::Square => "n=k^2",
        }
    }
}

/// Which part of a form family counts as bad in a census.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// No syllable certified stable.
    Unstable,
    /// Every syllable has an explicit instability witness.
    UnstableCertain,
    Singular,
}

/// Per-length counts of one factor, split by the classes the censuses need.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LengthCounts {
    pub all: u128,
    pub nontrivial: u128,
    pub outside_c: u128,
    pub not_conjugate: u128,
    pub reps: u128,
    /// Indexed by [`Mode`]: same classes restricted to bad coset representatives.
    pub bad_nontrivial: [u128; 3],
    pub bad_outside_c: [u128; 3],
    pub bad_not_conjugate: [u128; 3],
    pub bad_reps: [u128; 3],
}

fn mode_index(m: Mode) -> usize {
    match m {
        Mode::Unstable => 0,
        Mode::UnstableCertain => 1,
        Mode::Singular => 2,
    }
}

/// Exhaustive classification of one factor's ball.
#[derive(Debug, Clone)]
pub struct FactorCensus {
    pub side: Side,
    pub by_length: Vec<LengthCounts>,
}

impl FactorCensus {
    pub fn build(spec: &GroupSpec, side: Side, n_max: usize) -> Result<Self> {
        let strat = spec.stratifier(side);
        let t = strat.transversal();
        let mut by_length = vec![LengthCounts::default(); n_max + 1];
        for w in enumerate_ball(spec.alphabet(side), n_max) {
            let row = &mut by_length[w.len()];
            let (_, s) = t.coset_decompose(&w);
            let class = strat.classify(&s)?;
            let bad = [
                !matches!(class.stability, Stability::StableCertified),
                class.stability.is_unstable(),
                class.singular,
            ];
            let in_c = s.is_empty();
            let conj = in_c || crate::stratify::conjugate_into(&w, t.graph());
            let is_rep = s == w;
            row.all += 1;
            let flags = [!w.is_empty(), !in_c, !conj, is_rep && !w.is_empty()];
            let totals = [&mut row.nontrivial, &mut row.outside_c, &mut row.not_conjugate, &mut row.reps];
            for (f, slot) in flags.iter().zip(totals) {
                *slot += u128::from(*f);
            }
            for m in 0..3 {
                if bad[m] {
                    row.bad_nontrivial[m] += u128::from(flags[0]);
                    row.bad_outside_c[m] += u128::from(flags[1]);
                    row.bad_not_conjugate[m] += u128::from(flags[2]);
                    row.bad_reps[m] += u128::from(flags[3]);
                }
            }
        }
        Ok(FactorCensus { side, by_length })
    }

    pub fn n_max(&self) -> usize {
        self.by_length.len() - 1
    }

    /// Sizes of the denominator and numerator factor sets among words of length at most n, for
    /// syllables of a `kind` form with `k` syllables. None where the kind has no such forms.
    pub fn ball_sets(&self, kind: Kind, k: usize, n: usize, mode: Mode) -> Option<(u128, u128)> {
        let m = mode_index(mode);
        let pick = |c: &LengthCounts| -> (u128, u128) {
            match (kind, k) {
                (Kind::EF, _) => (c.nontrivial, c.bad_nontrivial[m]),
                (Kind::RF, _) => (c.outside_c, c.bad_outside_c[m]),
                (Kind::CNF, _) => (c.reps, c.bad_reps[m]),
                (Kind::CRF, 1) => (c.not_conjugate, c.bad_not_conjugate[m]),
                (Kind::CRF, _) => (c.outside_c, c.bad_outside_c[m]),
            }
        };
        if kind == Kind::CRF && k > 1 && k % 2 == 1 {
            return None;
        }
        Some(self.by_length.iter().take(n + 1).map(pick).fold((0, 0), |acc, x| (acc.0 + x.0, acc.1 + x.1)))
    }
}

/// Exact cardinality census of one `(n, k)` cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusCell {
    pub kind: Kind,
    pub n: usize,
    pub k: usize,
    pub total: u128,
    pub unstable: u128,
    pub unstable_certain: u128,
    pub singular: u128,
}

impl CensusCell {
    pub const CSV_HEADER: &'static str = "n,k,total,unstable,unstable_certain,singular";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.n, self.k, self.total, self.unstable, self.unstable_certain, self.singular)
    }

    pub fn rho(&self) -> Option<f64> {
        (self.total > 0).then(|| self.unstable as f64 / self.total as f64)
    }
}

/// Cells of one form kind over `0 ≤ k ≤ k_max`, `1 ≤ n ≤ n_max`.
pub fn census_cells(kind: Kind, a: &FactorCensus, b: &FactorCensus, n_max: usize, k_max: usize) -> Result<Vec<CensusCell>> {
    if n_max > a.n_max() || n_max > b.n_max() {
        return Err(Error::Guard(format!("cells up to n = {n_max} need factor censuses that large")));
    }
    let overflow = || Error::Guard("cell count overflows 128 bits".into());
    let mut out = Vec::new();
    for n in 1..=n_max {
        for k in 0..=k_max {
            let mut cell = CensusCell { kind, n, k, total: 0, unstable: 0, unstable_certain: 0, singular: 0 };
            if k == 0 {
                cell.total = 1;
                cell.unstable = 1;
                cell.unstable_certain = 1;
                cell.singular = 1;
            } else if let Some((ta, _)) = a.ball_sets(kind, k, n, Mode::Unstable) {
                let (tb, _) = b.ball_sets(kind, k, n, Mode::Unstable).unwrap();
                cell.total = parity_count(ta, tb, k).ok_or_else(overflow)?;
                for (mode, slot) in [
                    (Mode::Unstable, &mut cell.unstable),
                    (Mode::UnstableCertain, &mut cell.unstable_certain),
                    (Mode::Singular, &mut cell.singular),
                ] {
                    let (_, qa) = a.ball_sets(kind, k, n, mode).unwrap();
                    let (_, qb) = b.ball_sets(kind, k, n, mode).unwrap();
                    *slot = parity_count(qa, qb, k).ok_or_else(overflow)?;
                }
            }
            out.push(cell);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axes {
    /// (syllable length bound n, syllable count k)
    LengthCount,
    /// (mean length l, syllable count k)
    MeanCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub axis1: f64,
    pub k: usize,
    pub numerator: f64,
    pub denominator: f64,
    pub exact: Option<(u128, u128)>,
    pub rho: Option<f64>,
}

/// Frequencies `ρ` over a grid, with the undefined cells kept.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub axes: Axes,
    pub cells: Vec<GridCell>,
}

impl DensityGrid {
    pub const CSV_HEADER: &'static str = "axis1,axis2,numerator,denominator,rho";

    pub fn from_census(cells: &[CensusCell]) -> Self {
        DensityGrid {
            axes: Axes::LengthCount,
            cells: cells
                .iter()
                .map(|c| GridCell {
                    axis1: c.n as f64,
                    k: c.k,
                    numerator: c.unstable as f64,
                    denominator: c.total as f64,
                    exact: Some((c.unstable, c.total)),
                    rho: c.rho(),
                })
                .collect(),
        }
    }

    pub fn get(&self, axis1: f64, k: usize) -> Option<&GridCell> {
        self.cells.iter().find(|c| c.axis1 == axis1 && c.k == k)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for c in &self.cells {
            let (num, den) = match c.exact {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => (format!("{:e}", c.numerator), format!("{:e}", c.denominator)),
            };
            let rho = c.rho.map(|r| format!("{r:e}")).unwrap_or_default();
            let a1 = match self.axes {
                Axes::LengthCount => format!("{}", c.axis1 as usize),
                Axes::MeanCount => format!("{}", c.axis1),
            };
            s.push_str(&format!("{a1},{},{num},{den},{rho}\n", c.k));
        }
        s
    }

    /// `(k, ρ)` along a direction, over defined cells with `k ≥ 1`.
    pub fn slice(&self, d: Direction, n_max: usize, k_max: usize) -> Vec<(f64, f64)> {
        (1..=k_max)
            .filter_map(|k| {
                let n = d.n_of(k, n_max);
                self.get(n as f64, k).and_then(|c| c.rho).map(|r| (k as f64, r))
            })
            .collect()
    }
}

/// Per-factor masses `(T, Q)` of the form family's syllable sets under μ_s conditioned on
/// nontrivial words, summed over lengths up to `n_len`.
pub fn cesaro_factor_masses(
    kind: Kind,
    t: &Transversal,
    strata: &CosetStrata,
    p: &MeasureParams,
    n_len: usize,
) -> Result<(f64, f64)> {
    let probs = t.graph().path_probs(n_len);
    let uns = strata.unstable_fractions(t, n_len);
    let base_unstable = strata.internal.first().is_some_and(|c| c.stability.is_unstable());
    let (mut tm, mut qm) = (0.0, 0.0);
    for n in 1..=n_len {
        let w = p.s * (1.0 - p.s).powi(n as i32 - 1);
        let (tf, qf) = match kind {
            Kind::EF => (1.0, uns[n]),
            Kind::RF | Kind::CNF => {
                let in_c = probs[n][0];
                (1.0 - in_c, uns[n] - if base_unstable { in_c } else { 0.0 })
            }
            Kind::CRF => return Err(Error::Unsupported("no mass family for cyclically reduced forms".into())),
        };
        tm += w * tf;
        qm += w * qf.max(0.0);
    }
    Ok((tm, qm))
}

/// `ρ^{l,k}` for `k = 1..=k_max` from per-factor masses.
pub fn cesaro_row(a: (f64, f64), b: (f64, f64), k_max: usize) -> Vec<f64> {
    (1..=k_max).map(|k| parity_mass(a.1, b.1, k) / parity_mass(a.0, b.0, k)).collect()
}

/// Count of `|R ∩ S_n|` for a counted set divided by the sphere size.
pub fn sphere_fraction(count: u128, rank: u32, n: usize) -> f64 {
    count as f64 / sphere_count(rank, n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{classify_form, NormalForm};
    use crate::subgraph::fold;
    use crate::words::{enumerate_sphere, Alphabet, Tag};

    fn fab() -> Alphabet {
        Alphabet::new(2, Tag::A).unwrap()
    }

    fn sq() -> Transversal {
        Transversal::new(fold(fab(), &[Word::parse(fab(), "a a").unwrap()]).unwrap())
    }

    fn reference() -> GroupSpec {
        GroupSpec::parse("rank_a = 2\nrank_b = 2\nrank_c = 1\nu_z = a a\nv_z = x x x\n", None).unwrap()
    }

    #[test]
    fn mu_s_examples() {
        let p = MeasureParams::new(0.5, 2).unwrap();
        assert_eq!(mu_s(&Word::identity(fab()), &p), 0.5);
        assert!((mu_s(&Word::parse(fab(), "b").unwrap(), &p) - 0.0625).abs() < 1e-15);
        let total: f64 = enumerate_ball(fab(), 12).map(|w| mu_s(&w, &p)).sum();
        assert!((total - (1.0 - 0.5f64.powi(13))).abs() < 1e-9);
        for n in 0..=6 {
            let sphere: f64 = enumerate_sphere(fab(), n).map(|w| mu_s(&w, &p)).sum();
            assert!((sphere - 0.5 * 0.5f64.powi(n as i32)).abs() < 1e-14);
        }
        assert!(MeasureParams::new(1.0, 2).is_err());
        assert!((MeasureParams::from_mean_length(4.0, 2).unwrap().s() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn relative_examples() {
        let t = sq();
        let p = MeasureParams::new(0.3, 2).unwrap();
        let b = Word::parse(fab(), "b").unwrap();
        assert_eq!(base_visits(&b, &t), 1);
        assert!((mu_s_relative(&b, &t, &p).unwrap() - 0.25).abs() < 1e-15);
        let aab = Word::parse(fab(), "a a b").unwrap();
        assert_eq!(base_visits(&aab, &t), 2);
        assert!(matches!(mu_s_relative(&Word::parse(fab(), "a a").unwrap(), &t, &p), Err(Error::Domain(_))));
        let whole = Transversal::new(
            fold(fab(), &[Word::parse(fab(), "a a").unwrap(), Word::parse(fab(), "b").unwrap(), Word::parse(fab(), "a b A").unwrap()])
                .unwrap(),
        );
        assert!(matches!(mu_s_relative(&b, &whole, &p), Err(Error::Unsupported(_))));
        assert!((walk_law(&b, &t, &p).unwrap() - 0.3 / 4.0).abs() < 1e-15);
        assert_eq!(walk_law(&Word::parse(fab(), "a").unwrap(), &t, &p).unwrap(), 0.0);
    }

    #[test]
    fn walk_law_is_a_probability() {
        let t = sq();
        let p = MeasureParams::new(0.4, 2).unwrap();
        let total: f64 = enumerate_ball(fab(), 14)
            .filter(|w| !t.graph().accepts(w.letters()))
            .map(|w| walk_law(&w, &t, &p).unwrap())
            .sum();
        assert!(total > 0.995 && total <= 1.0 + 1e-12, "{total}");
        let mass_b = walk_coset_mass(&t, 0, 1, &p, 400);
        let brute: f64 = enumerate_ball(fab(), 14)
            .filter(|w| t.coset_decompose(w).1.render() == "b")
            .map(|w| walk_law(&w, &t, &p).unwrap())
            .sum();
        assert!((mass_b - brute).abs() < 1e-4, "{mass_b} vs {brute}");
    }

    #[test]
    fn theta_examples() {
        let th = ThetaDist::new(ThetaKind::Zeta2, ThetaDomain::Positive).unwrap();
        assert!((th.pmf(1) - 6.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
        assert_eq!(th.pmf(0), 0.0);
        for cutoff in [1usize, 10, 100, 1000] {
            let mass: f64 = (1..=cutoff).map(|k| th.pmf(k)).sum();
            assert!(mass >= 1.0 - th.tail_bound(cutoff) - 1e-12);
            assert!(mass <= 1.0);
        }
        let g = ThetaDist::new(ThetaKind::Geometric(0.3), ThetaDomain::Natural).unwrap();
        let mass: f64 = (0..=20).map(|k| g.pmf(k)).sum();
        assert!((1.0 - mass - g.tail_bound(20)).abs() < 1e-12);
        let e = ThetaDist::new(ThetaKind::Uniform(4), ThetaDomain::EvenOrOne).unwrap();
        assert_eq!((e.pmf(1), e.pmf(2), e.pmf(3), e.pmf(6), e.pmf(8)), (0.25, 0.25, 0.0, 0.25, 0.0));
        assert!(ThetaDist::new(ThetaKind::Geometric(0.0), ThetaDomain::Natural).is_err());
    }

    #[test]
    fn free_product_layers() {
        let p = MeasureParams::new(0.5, 2).unwrap();
        let th = ThetaDist::new(ThetaKind::Zeta2, ThetaDomain::Positive).unwrap();
        let bx = Alphabet::new(2, Tag::B).unwrap();
        let f = vec![(Side::A, Word::parse(fab(), "a").unwrap())];
        let m = mu_free_product(&f, &th, |w| mu_s_nontrivial(w, &p), |w| mu_s_nontrivial(w, &p));
        assert!((m - 0.5 * th.pmf(1) * 0.25 * 0.5).abs() < 1e-15);
        let ball_a: Vec<Word> = enumerate_ball(fab(), 3).filter(|w| !w.is_empty()).collect();
        let ball_b: Vec<Word> = enumerate_ball(bx, 3).filter(|w| !w.is_empty()).collect();
        let radius_mass = 1.0 - 0.5f64.powi(3);
        for i in 1..=3usize {
            let mut total = 0.0;
            for start in [Side::A, Side::B] {
                let mut stack: Vec<Vec<(Side, Word)>> = vec![vec![]];
                while let Some(cur) = stack.pop() {
                    if cur.len() == i {
                        total += mu_free_product(&cur, &th, |w| mu_s_nontrivial(w, &p), |w| mu_s_nontrivial(w, &p));
                        continue;
                    }
                    let side = if cur.len() % 2 == 0 { start } else { start.other() };
                    for w in if side == Side::A { &ball_a } else { &ball_b } {
                        let mut nxt = cur.clone();
                        nxt.push((side, w.clone()));
                        stack.push(nxt);
                    }
                }
            }
            assert!((total - th.pmf(i) * radius_mass.powi(i as i32)).abs() < 1e-12, "layer {i}");
        }
    }

    #[test]
    fn frequency_examples() {
        let t = sq();
        let c: Vec<u128> = (0..=8).map(|n| t.graph().count_reduced_accepted(n)).collect();
        let all: Vec<u128> = (0..=8).map(|n| sphere_count(2, n)).collect();
        assert_eq!(frequency(&all, &all, 5), Some(1.0));
        assert!((frequency(&c, &all, 2).unwrap() - 2.0 / 12.0).abs() < 1e-15);
        assert_eq!(frequency(&c, &[0], 0), None);
        assert!(cumulative(&c, &all, 8).unwrap() < 0.01);
    }

    #[test]
    fn cesaro_examples() {
        assert!((cesaro_density(&[0.3; 50]).value - 0.3).abs() < 1e-15);
        let osc: Vec<f64> = (1..=1000).map(|n| if n % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert!((cesaro_density(&osc).value - 0.5).abs() < 1e-3);
        let conv: Vec<f64> = (1..=2000).map(|n| 0.7 + 1.0 / n as f64).collect();
        assert!((cesaro_density(&conv).value - 0.7).abs() < 0.01);
        let t = sq();
        let probs = t.graph().path_probs(400);
        let f: Vec<f64> = (1..=400).map(|n| probs[n][0]).collect();
        let c = cesaro_density(&f);
        assert!(c.value < 0.01 && c.running[399] < c.running[99]);
    }

    #[test]
    fn decay_examples() {
        let geo: Vec<(f64, f64)> = (0..10).map(|t| (t as f64, 0.5f64.powi(t))).collect();
        let fit = fit_decay(&geo).unwrap();
        assert!((fit.delta - 0.5).abs() < 1e-6 && fit.quality > 0.999_999);
        let flat: Vec<(f64, f64)> = (0..6).map(|t| (t as f64, 0.2)).collect();
        let fit = fit_decay(&flat).unwrap();
        assert!((fit.delta - 1.0).abs() < 1e-12);
        assert!(fit_decay(&[(0.0, 1.0), (1.0, 0.0), (2.0, 0.5)]).is_err());
        let t = sq();
        let series: Vec<(f64, f64)> = (1..=10)
            .map(|n| (n as f64, frequency(&[t.graph().count_reduced_accepted(n)], &[sphere_count(2, n)], 0).unwrap()))
            .collect();
        let fit = fit_decay(&series).unwrap();
        assert_eq!(fit.used, 5);
        assert!(fit.delta < 1.0 && fit.quality > 0.9, "{fit:?}");
    }

    #[test]
    fn parity_examples() {
        assert_eq!(parity_count(3, 5, 0), Some(1));
        assert_eq!(parity_count(3, 5, 1), Some(8));
        assert_eq!(parity_count(3, 5, 2), Some(30));
        assert_eq!(parity_count(3, 5, 3), Some(15 * 8));
        // one factor halved, k = 2
        assert!((parity_mass(0.5, 1.0, 2) / parity_mass(1.0, 1.0, 2) - 0.5).abs() < 1e-15);
    }

    /// Alternating sequences of nontrivial syllables drawn from per-side word lists.
    fn sequences(a: &[Word], b: &[Word], k: usize) -> Vec<Vec<(Side, Word)>> {
        let mut out = Vec::new();
        if k == 0 {
            return vec![vec![]];
        }
        for start in [Side::A, Side::B] {
            let mut layer: Vec<Vec<(Side, Word)>> = vec![vec![]];
            for i in 0..k {
                let side = if i % 2 == 0 { start } else { start.other() };
                let pool = if side == Side::A { a } else { b };
                layer = layer
                    .into_iter()
                    .flat_map(|cur| {
                        pool.iter().map(move |w| {
                            let mut n = cur.clone();
                            n.push((side, w.clone()));
                            n
                        })
                    })
                    .collect();
            }
            out.extend(layer);
        }
        out
    }

    #[test]
    fn census_cells_match_brute_force() {
        let spec = reference();
        let ca = FactorCensus::build(&spec, Side::A, 2).unwrap();
        let cb = FactorCensus::build(&spec, Side::B, 2).unwrap();
        for kind in [Kind::EF, Kind::RF, Kind::CNF, Kind::CRF] {
            let cells = census_cells(kind, &ca, &cb, 2, 3).unwrap();
            for cell in cells.iter().filter(|c| c.k >= 1) {
                let keep = |side: Side, w: &Word| -> bool {
                    let t = spec.transversal(side);
                    match (kind, cell.k) {
                        (Kind::EF, _) => true,
                        (Kind::RF, _) | (Kind::CRF, 2..) => !spec.in_c(side, w),
                        (Kind::CNF, _) => t.is_representative(w.letters()),
                        (Kind::CRF, _) => !crate::stratify::conjugate_into(w, t.graph()),
                    }
                };
                let pool = |side: Side| -> Vec<Word> {
                    enumerate_ball(spec.alphabet(side), cell.n).filter(|w| !w.is_empty() && keep(side, w)).collect()
                };
                let (pa, pb) = (pool(Side::A), pool(Side::B));
                let mut total = 0u128;
                let mut unstable = 0u128;
                let mut singular = 0u128;
                if !(kind == Kind::CRF && cell.k == 3) {
                    for body in sequences(&pa, &pb, cell.k) {
                        let nf = NormalForm { kind, head: Word::identity(spec.z_alphabet()), body, conjugator: None };
                        let v = classify_form(&nf, &spec);
                        total += 1;
                        unstable += u128::from(v.unstable());
                        singular += u128::from(v.singular());
                    }
                }
                assert_eq!((cell.total, cell.unstable, cell.singular), (total, unstable, singular), "{kind:?} {cell:?}");
            }
        }
    }

    #[test]
    fn finite_index_census_is_all_bad() {
        let spec = GroupSpec::parse(
            "rank_a = 2\nrank_b = 2\nrank_c = 3\nu_z = a a\nu_z = b\nu_z = a b A\nv_z = x x\nv_z = y\nv_z = x y X\n",
            None,
        )
        .unwrap();
        let ca = FactorCensus::build(&spec, Side::A, 3).unwrap();
        let cb = FactorCensus::build(&spec, Side::B, 3).unwrap();
        for kind in Kind::ALL {
            for cell in census_cells(kind, &ca, &cb, 3, 4).unwrap() {
                assert_eq!(cell.unstable, cell.total);
                assert_eq!(cell.singular, cell.total);
            }
        }
    }

    #[test]
    fn grid_monotone_in_numerator() {
        let spec = reference();
        let ca = FactorCensus::build(&spec, Side::A, 3).unwrap();
        let cb = FactorCensus::build(&spec, Side::B, 3).unwrap();
        for kind in Kind::ALL {
            for cell in census_cells(kind, &ca, &cb, 3, 4).unwrap() {
                assert!(cell.unstable_certain <= cell.unstable && cell.unstable <= cell.total);
                assert!(cell.singular <= cell.unstable);
            }
        }
        let grid = DensityGrid::from_census(&census_cells(Kind::CRF, &ca, &cb, 3, 3).unwrap());
        let csv = grid.to_csv();
        assert!(csv.starts_with(DensityGrid::CSV_HEADER));
        assert!(csv.lines().any(|l| l.starts_with("1,3,0,0,") && l.ends_with(',')));
    }

    #[test]
    fn cesaro_masses_reference() {
        let spec = reference();
        for side in [Side::A, Side::B] {
            let st = spec.stratifier(side);
            let strata = st.coset_strata(6).unwrap();
            assert!(strata.exact);
            let p = MeasureParams::from_mean_length(4.0, 2).unwrap();
            let (t_ef, q_ef) = cesaro_factor_masses(Kind::EF, st.transversal(), &strata, &p, 600).unwrap();
            assert!((t_ef - 1.0).abs() < 1e-9);
            assert!(q_ef > 0.0 && q_ef < 1.0);
            // Brute force over lengths up to 10 of the same sum.
            let brute: f64 = enumerate_ball(spec.alphabet(side), 10)
                .filter(|w| !w.is_empty())
                .filter(|w| {
                    let (_, s) = st.transversal().coset_decompose(w);
                    st.classify(&s).unwrap().stability.is_unstable()
                })
                .map(|w| mu_s_nontrivial(&w, &p))
                .sum();
            assert!((q_ef - brute).abs() < 0.9f64.powi(10), "{q_ef} vs {brute}");
        }
    }

    #[test]
    fn sphere_and_ball_density_agree() {
        // Words starting with `a`: a quarter of every sphere and of every ball minus the identity.
        let start_a: Vec<u128> = (0..=10).map(|n| if n == 0 { 0 } else { sphere_count(2, n) / 4 }).collect();
        let all: Vec<u128> = (0..=10).map(|n| sphere_count(2, n)).collect();
        let sph = frequency(&start_a, &all, 10).unwrap();
        let ball = cumulative(&start_a, &all, 10).unwrap();
        assert!((sph - 0.25).abs() < 1e-15 && (ball - 0.25).abs() < 1e-4);
    }
}
