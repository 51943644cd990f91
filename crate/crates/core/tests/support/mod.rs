//! Independent reference implementations shared by the integration tests.
//!
//! Nothing here calls into the library's metric, weighting or isotonic
//! code; each oracle is written from the definition.

#![allow(dead_code)]

use calibra::model::{LabeledDataset, SimilarityMatrix, Split};
use calibra::Matrix;
use num_bigint::{BigInt, BigUint};
use num_traits::{Float, One, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Confidences mixing continuous draws, bin edges and repeated values.
pub fn tricky_confidences(rng: &mut TestRng, n: usize, m: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(n);
    for _ in 0..n {
        let v = match rng.below(4) {
            0 => rng.below(m + 1) as f64 / m as f64,
            1 if !out.is_empty() => out[rng.below(out.len())],
            _ => rng.uniform(),
        };
        out.push(v);
    }
    out
}

/// Whether `c` falls in the `b`-th of `m` equal-width bins
/// ((b/m, (b+1)/m], with 0 in the first bin).
fn in_width_bin(c: f64, b: usize, m: usize) -> bool {
    let lo = b as f64 / m as f64;
    let hi = (b + 1) as f64 / m as f64;
    (b == 0 && c <= hi) || (lo < c && c <= hi)
}

struct Bin {
    count: usize,
    hits: usize,
    conf_sum: f64,
}

fn bins_by(conf: &[f64], ok: &[bool], m: usize, member: impl Fn(usize, usize) -> bool) -> Vec<Bin> {
    (0..m)
        .map(|b| {
            let mut bin = Bin {
                count: 0,
                hits: 0,
                conf_sum: 0.0,
            };
            for i in 0..conf.len() {
                if member(i, b) {
                    bin.count += 1;
                    bin.hits += ok[i] as usize;
                    bin.conf_sum += conf[i];
                }
            }
            bin
        })
        .collect()
}

fn gaps(bins: &[Bin], n: usize) -> Vec<(f64, f64)> {
    bins.iter()
        .filter(|b| b.count > 0)
        .map(|b| {
            let acc = b.hits as f64 / b.count as f64;
            let conf = b.conf_sum / b.count as f64;
            (b.count as f64 / n as f64, (acc - conf).abs())
        })
        .collect()
}

fn weighted_sum(g: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(w, gap) in g {
        total += w * gap;
    }
    total
}

pub fn naive_ece(conf: &[f64], ok: &[bool], m: usize) -> f64 {
    let bins = bins_by(conf, ok, m, |i, b| in_width_bin(conf[i], b, m));
    weighted_sum(&gaps(&bins, conf.len()))
}

pub fn naive_mce(conf: &[f64], ok: &[bool], m: usize) -> f64 {
    let bins = bins_by(conf, ok, m, |i, b| in_width_bin(conf[i], b, m));
    gaps(&bins, conf.len())
        .iter()
        .fold(0.0, |acc, &(_, g)| acc.max(g))
}

/// Equal-mass bins from explicit ranks: sample `i` ranks by the number of
/// samples below it, ties broken by index; the first `n mod m` bins hold
/// one extra sample.
pub fn naive_ace(conf: &[f64], ok: &[bool], m: usize) -> f64 {
    let n = conf.len();
    let rank = |i: usize| {
        (0..n)
            .filter(|&j| conf[j] < conf[i] || (conf[j] == conf[i] && j < i))
            .count()
    };
    let bin_of_rank = |r: usize| {
        let mut start = 0;
        for b in 0..m {
            let size = n / m + usize::from(b < n % m);
            if r < start + size {
                return b;
            }
            start += size;
        }
        unreachable!()
    };
    let bins = bins_by(conf, ok, m, |i, b| bin_of_rank(rank(i)) == b);
    weighted_sum(&gaps(&bins, n))
}

/// Exact `(mantissa, exponent)` with `x = mantissa · 2^exponent`.
fn dyadic(x: f64) -> (BigInt, i64) {
    let (mant, exp, sign) = Float::integer_decode(x);
    (BigInt::from(mant) * i64::from(sign), i64::from(exp))
}

/// `x · 2^shift` rounded toward zero, as an integer.
fn shifted(m: &BigInt, e: i64, shift: i64) -> BigInt {
    let total = e + shift;
    if total >= 0 {
        m << total as usize
    } else {
        m >> (-total) as usize
    }
}

const PREC: i64 = 480;

/// `exp(-x) · 2^PREC` for a non-negative dyadic `x = m · 2^e`, with error
/// far below one part in 2^300.
fn exp_neg_fixed(m: &BigInt, e: i64) -> BigInt {
    let one = BigInt::one() << PREC as usize;
    // halve the argument until it is below 2^-16, then square back
    let mag = m.bits() as i64 + e;
    let halvings = (mag + 16).max(0);
    let y = shifted(m, e - halvings, PREC);
    let mut term = one.clone();
    let mut sum = one.clone();
    for n in 1..80u32 {
        term = -(&term * &y) >> PREC as usize;
        term /= n;
        if term.is_zero() {
            break;
        }
        sum += &term;
    }
    for _ in 0..halvings {
        sum = (&sum * &sum) >> PREC as usize;
    }
    sum
}

/// Relative error of `approx` against `alpha · exp(-k·z)` evaluated in
/// big-integer fixed point from the exact binary values of the inputs.
pub fn caw_relative_error(approx: f64, alpha: f64, k: f64, z: f64) -> f64 {
    let (km, ke) = dyadic(k);
    let (zm, ze) = dyadic(z);
    let e = exp_neg_fixed(&(km * zm), ke + ze);
    let (am, ae) = dyadic(alpha);
    // exact ≈ am · e · 2^(ae - PREC)
    let exact = am * e;
    let (pm, pe) = dyadic(approx);
    let base = (ae - PREC).min(pe);
    let exact_s = shifted(&exact, ae - PREC, -base);
    let approx_s = shifted(&pm, pe, -base);
    let diff = (&approx_s - &exact_s).magnitude().clone();
    ratio(&diff, exact_s.magnitude())
}

/// High-precision logistic `1 / (1 + exp(-x))` for `x ≥ 0`, as f64.
pub fn logistic_reference(x: f64) -> f64 {
    let (m, e) = dyadic(x);
    let ex = exp_neg_fixed(&m, e);
    let one = BigInt::one() << PREC as usize;
    let denom = &one + &ex;
    let num = &one << PREC as usize;
    let q = num / denom;
    ratio(q.magnitude(), one.magnitude())
}

/// High-precision `exp(-x) / (1 + exp(-x))` for `x ≥ 0`, as f64.
pub fn logistic_complement_reference(x: f64) -> f64 {
    let (m, e) = dyadic(x);
    let ex = exp_neg_fixed(&m, e);
    let one = BigInt::one() << PREC as usize;
    let denom = &one + &ex;
    let q = (ex << PREC as usize) / denom;
    ratio(q.magnitude(), one.magnitude())
}

fn ratio(a: &BigUint, b: &BigUint) -> f64 {
    // keep 120 significant bits of each operand before converting
    let sa = (a.bits() as i64 - 120).max(0);
    let sb = (b.bits() as i64 - 120).max(0);
    let a = (a >> sa as usize).to_f64().unwrap();
    let b = (b >> sb as usize).to_f64().unwrap();
    a / b * 2f64.powi((sa - sb) as i32)
}

/// Monotone least-squares fit by enumerating every partition of the
/// sequence into contiguous blocks. Targets are `k / 4` for integer `k`;
/// the optimum maximises Σ sum_b² / len_b, compared exactly on a common
/// denominator. Returns the fitted values.
pub fn isotonic_exhaustive(quarters: &[i64]) -> Vec<f64> {
    const LCM: i64 = 840; // lcm(1..=8)
    let n = quarters.len();
    assert!((1..=8).contains(&n));
    let mut best: Option<(i64, u32)> = None;
    for cuts in 0u32..(1 << (n - 1)) {
        let mut score = 0i64;
        let mut feasible = true;
        let mut start = 0;
        let mut prev: Option<(i64, i64)> = None;
        for i in 0..n {
            if i == n - 1 || cuts & (1 << i) != 0 {
                let sum: i64 = quarters[start..=i].iter().sum();
                let len = (i + 1 - start) as i64;
                if let Some((ps, pl)) = prev {
                    if ps * len > sum * pl {
                        feasible = false;
                        break;
                    }
                }
                score += sum * sum * (LCM / len);
                prev = Some((sum, len));
                start = i + 1;
            }
        }
        if feasible && best.is_none_or(|(s, _)| score > s) {
            best = Some((score, cuts));
        }
    }
    let cuts = best
        .expect("singletons of a sorted run are always feasible")
        .1;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    for i in 0..n {
        if i == n - 1 || cuts & (1 << i) != 0 {
            let sum: i64 = quarters[start..=i].iter().sum();
            let len = i + 1 - start;
            let mean = (sum as f64 / 4.0) / len as f64;
            out.extend(std::iter::repeat_n(mean, len));
            start = i + 1;
        }
    }
    out
}

/// Reference rows uniform in [-1, 1]; fine-tuned rows are perturbed copies
/// with occasional exact ties.
pub fn random_dataset(rng: &mut TestRng, n: usize, c: usize) -> LabeledDataset<f64> {
    let mut reference = Vec::with_capacity(n);
    let mut finetuned = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let spread = rng.range(0.01, 0.4);
    for _ in 0..n {
        let r: Vec<f64> = (0..c).map(|_| rng.range(-0.3, 0.6)).collect();
        let mut f: Vec<f64> = r
            .iter()
            .map(|&x| (x + spread * rng.normal()).clamp(-1.0, 1.0))
            .collect();
        if rng.below(10) == 0 {
            let (a, b) = (rng.below(c), rng.below(c));
            f[a] = f[b];
        }
        labels.push(rng.below(c));
        reference.push(r);
        finetuned.push(f);
    }
    LabeledDataset::new(
        SimilarityMatrix::from_rows(&reference).unwrap(),
        SimilarityMatrix::from_rows(&finetuned).unwrap(),
        labels,
        Split::Test,
    )
    .unwrap()
}

/// Logits with entries `scale · N(0, 1)` and labels drawn from their
/// softmax at temperature `t`.
pub fn planted_temperature(
    rng: &mut TestRng,
    n: usize,
    c: usize,
    scale: f64,
    t: f64,
) -> (Matrix<f64>, Vec<usize>) {
    let mut data = Vec::with_capacity(n * c);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..c).map(|_| scale * rng.normal()).collect();
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = row.iter().map(|&x| ((x - max) / t).exp()).collect();
        let total: f64 = w.iter().sum();
        let u = rng.uniform() * total;
        let mut acc = 0.0;
        let mut y = c - 1;
        for (j, wj) in w.iter().enumerate() {
            acc += wj;
            if u < acc {
                y = j;
                break;
            }
        }
        labels.push(y);
        data.extend(row);
    }
    (Matrix::new(n, c, data).unwrap(), labels)
}

/// Plain two-pass softmax confidence and argmax (lowest index on ties).
pub fn naive_prediction(row: &[f64], scale: f64) -> (usize, f64) {
    let mut best = 0;
    for j in 1..row.len() {
        if row[j] > row[best] {
            best = j;
        }
    }
    let total: f64 = row.iter().map(|&x| ((x - row[best]) * scale).exp()).sum();
    (best, 1.0 / total)
}

/// Mean of `S[i, y_i]` minus mean of the largest off-label entry.
pub fn naive_contrast(m: &Matrix<f64>, labels: &[usize]) -> f64 {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = m.row(i);
        pos += row[y];
        neg += row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != y)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
    }
    (pos - neg) / labels.len() as f64
}
