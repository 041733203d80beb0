//! Random words and random normal forms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::forms::{GroupSpec, Kind, MixedWord, NormalForm, Side};
use crate::measures::{MeasureParams, ThetaDist};
use crate::stratify::conjugate_into;
use crate::subgraph::{Index, Transversal};
use crate::words::{letter_of_slot, slot, Alphabet, Letter, Word};

/// Seeded ChaCha8 generator; independent streams share the seed and differ in stream number.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// Fresh stream for task `task`, independent of this one.
    pub fn split(&self, task: u64) -> Self {
        Self::with_stream(self.seed, task.wrapping_add(1).wrapping_add(self.stream << 32))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn algorithm(&self) -> &'static str {
        "chacha8"
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

fn step_letter<R: Rng + ?Sized>(rank: u32, last: Option<Letter>, rng: &mut R) -> Letter {
    let d = 2 * rank as usize;
    match last {
        None => letter_of_slot(rng.gen_range(0..d)),
        Some(l) => {
            let back = slot(-l);
            let mut s = rng.gen_range(0..d - 1);
            if s >= back {
                s += 1;
            }
            letter_of_slot(s)
        }
    }
}

/// No-return walk on the Cayley graph stopping with probability `s` at every vertex.
pub fn sample_mu_s<R: Rng + ?Sized>(alphabet: Alphabet, p: &MeasureParams, rng: &mut R) -> Word {
    let mut w: Vec<Letter> = Vec::new();
    while rng.gen::<f64>() >= p.s() {
        let l = step_letter(alphabet.rank, w.last().copied(), rng);
        w.push(l);
    }
    Word::new(alphabet, &w).unwrap()
}

/// μ_s conditioned on a nontrivial result.
pub fn sample_nontrivial<R: Rng + ?Sized>(alphabet: Alphabet, p: &MeasureParams, rng: &mut R) -> Word {
    let mut w: Vec<Letter> = vec![step_letter(alphabet.rank, None, rng)];
    while rng.gen::<f64>() >= p.s() {
        let l = step_letter(alphabet.rank, w.last().copied(), rng);
        w.push(l);
    }
    Word::new(alphabet, &w).unwrap()
}

/// Walk steps after which [`sample_factor_minus_c`] gives up.
pub const WALK_STEP_CAP: usize = 10_000_000;

/// No-return walk that may stop only off the subgroup graph, so the result is never in C.
pub fn sample_factor_minus_c<R: Rng + ?Sized>(t: &Transversal, p: &MeasureParams, rng: &mut R) -> Result<Word> {
    let g = t.graph();
    if let Index::Finite(n) = g.index() {
        return Err(Error::Unsupported(format!("the subgroup has finite index {n}; the walk never leaves its graph")));
    }
    let rank = t.alphabet().rank;
    let mut w: Vec<Letter> = Vec::new();
    let mut at = Some(0usize);
    for _ in 0..WALK_STEP_CAP {
        if at.is_none() && rng.gen::<f64>() < p.s() {
            return Ok(Word::new(t.alphabet(), &w).unwrap());
        }
        let l = step_letter(rank, w.last().copied(), rng);
        w.push(l);
        at = at.and_then(|v| g.step(v, l));
    }
    Err(Error::Starvation(format!("walk did not stop within {WALK_STEP_CAP} steps")))
}

/// Element of C drawn as a no-return walk over the `Z` alphabet.
pub fn sample_c<R: Rng + ?Sized>(spec: &GroupSpec, p: &MeasureParams, rng: &mut R) -> Word {
    sample_mu_s(spec.z_alphabet(), p, rng)
}

/// Walk parameters of the two factors and of C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormParams {
    pub a: MeasureParams,
    pub b: MeasureParams,
    pub c: MeasureParams,
}

impl FormParams {
    /// One stop probability for both factors and C.
    pub fn uniform(spec: &GroupSpec, s: f64) -> Result<Self> {
        Ok(FormParams {
            a: MeasureParams::new(s, spec.alphabet(Side::A).rank)?,
            b: MeasureParams::new(s, spec.alphabet(Side::B).rank)?,
            c: MeasureParams::new(s, spec.z_alphabet().rank)?,
        })
    }

    fn side(&self, side: Side) -> &MeasureParams {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }
}

fn first_side<R: Rng + ?Sized>(rng: &mut R) -> Side {
    if rng.gen::<bool>() {
        Side::A
    } else {
        Side::B
    }
}

fn alternate<R: Rng + ?Sized>(
    k: usize,
    rng: &mut R,
    mut draw: impl FnMut(Side, &mut R) -> Result<Word>,
) -> Result<Vec<(Side, Word)>> {
    let mut side = first_side(rng);
    let mut body = Vec::with_capacity(k);
    for _ in 0..k {
        body.push((side, draw(side, rng)?));
        side = side.other();
    }
    Ok(body)
}

fn form(kind: Kind, head: Word, body: Vec<(Side, Word)>) -> NormalForm {
    let conjugator = (kind == Kind::CRF).then(MixedWord::identity);
    NormalForm { kind, head, body, conjugator }
}

/// Elementary form with `k ~ θ` nontrivial μ_s syllables.
pub fn rg_ef<R: Rng + ?Sized>(spec: &GroupSpec, theta: &ThetaDist, p: &FormParams, rng: &mut R) -> Result<NormalForm> {
    let k = theta.sample(rng);
    if k == 0 {
        return Ok(form(Kind::EF, sample_c(spec, &p.c, rng), Vec::new()));
    }
    let body = alternate(k, rng, |side, r| Ok(sample_nontrivial(spec.alphabet(side), p.side(side), r)))?;
    Ok(form(Kind::EF, Word::identity(spec.z_alphabet()), body))
}

/// Reduced form with syllables drawn off C.
pub fn rg_rf<R: Rng + ?Sized>(spec: &GroupSpec, theta: &ThetaDist, p: &FormParams, rng: &mut R) -> Result<NormalForm> {
    let k = theta.sample(rng);
    if k == 0 {
        return Ok(form(Kind::RF, sample_c(spec, &p.c, rng), Vec::new()));
    }
    let body = alternate(k, rng, |side, r| sample_factor_minus_c(spec.transversal(side), p.side(side), r))?;
    Ok(form(Kind::RF, Word::identity(spec.z_alphabet()), body))
}

/// Canonical form: syllables drawn as in [`rg_rf`] and replaced by their coset representatives.
pub fn rg_cnf<R: Rng + ?Sized>(spec: &GroupSpec, theta: &ThetaDist, p: &FormParams, rng: &mut R) -> Result<NormalForm> {
    let k = theta.sample(rng);
    let body = if k == 0 {
        Vec::new()
    } else {
        alternate(k, rng, |side, r| {
            let t = spec.transversal(side);
            let g = sample_factor_minus_c(t, p.side(side), r)?;
            Ok(t.coset_decompose(&g).1)
        })?
    };
    let head = sample_c(spec, &p.c, rng);
    Ok(form(Kind::CNF, head, body))
}

/// Default rejection budget for single-syllable cyclically reduced forms.
pub const REJECTION_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RejectionStats {
    pub attempts: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

/// Cyclically reduced form; θ must live on `{0, 1}` and the even numbers.
pub fn rg_crf<R: Rng + ?Sized>(
    spec: &GroupSpec,
    theta: &ThetaDist,
    p: &FormParams,
    cap: usize,
    stats: &mut RejectionStats,
    rng: &mut R,
) -> Result<NormalForm> {
    let k = theta.sample(rng);
    if k > 1 && k % 2 == 1 {
        return Err(Error::Precondition(format!("θ produced odd syllable count {k}")));
    }
    let z = spec.z_alphabet();
    match k {
        0 => Ok(form(Kind::CRF, sample_c(spec, &p.c, rng), Vec::new())),
        1 => {
            let side = first_side(rng);
            let t = spec.transversal(side);
            for _ in 0..cap {
                stats.attempts += 1;
                let g = sample_factor_minus_c(t, p.side(side), rng)?;
                if !conjugate_into(&g, t.graph()) {
                    stats.accepted += 1;
                    return Ok(form(Kind::CRF, Word::identity(z), vec![(side, g)]));
                }
            }
            Err(Error::Starvation(format!(
                "no syllable outside the conjugates of C in {cap} attempts ({} accepted of {} so far)",
                stats.accepted, stats.attempts
            )))
        }
        _ => {
            let body = alternate(k, rng, |side, r| sample_factor_minus_c(spec.transversal(side), p.side(side), r))?;
            Ok(form(Kind::CRF, Word::identity(z), body))
        }
    }
}

/// Dispatches to the generator of the given kind.
pub fn rg<R: Rng + ?Sized>(
    kind: Kind,
    spec: &GroupSpec,
    theta: &ThetaDist,
    p: &FormParams,
    stats: &mut RejectionStats,
    rng: &mut R,
) -> Result<NormalForm> {
    match kind {
        Kind::EF => rg_ef(spec, theta, p, rng),
        Kind::RF => rg_rf(spec, theta, p, rng),
        Kind::CNF => rg_cnf(spec, theta, p, rng),
        Kind::CRF => rg_crf(spec, theta, p, REJECTION_CAP, stats, rng),
    }
}
