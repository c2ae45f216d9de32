use serde::{Deserialize, Serialize};

use super::ClassScores;
use crate::error::{Error, Result};
use crate::trials::TrialLabel;

/// Class priors and detection costs of the normalized a-DCF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ADcfConfig {
    pub pi_tar: f64,
    pub pi_non: f64,
    pub pi_spf: f64,
    pub c_miss: f64,
    pub c_fa_non: f64,
    pub c_fa_spf: f64,
}

impl Default for ADcfConfig {
    fn default() -> Self {
        ADcfConfig {
            pi_tar: 0.9405,
            pi_non: 0.0095,
            pi_spf: 0.05,
            c_miss: 1.0,
            c_fa_non: 10.0,
            c_fa_spf: 10.0,
        }
    }
}

impl ADcfConfig {
    pub fn validate(&self) -> Result<()> {
        let priors = [self.pi_tar, self.pi_non, self.pi_spf];
        if priors.iter().any(|p| !(*p > 0.0 && p.is_finite())) || ((priors.iter().sum::<f64>()) - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("a-DCF priors must be positive and sum to 1, got {priors:?}")));
        }
        let costs = [self.c_miss, self.c_fa_non, self.c_fa_spf];
        if costs.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(Error::Config(format!("a-DCF costs must be positive, got {costs:?}")));
        }
        Ok(())
    }

    /// Cost of the better of the two trivial systems (accept all, reject all).
    pub fn normalizer(&self) -> f64 {
        (self.c_miss * self.pi_tar).min(self.c_fa_non * self.pi_non + self.c_fa_spf * self.pi_spf)
    }

    pub fn cost(&self, r: &ErrorRates) -> f64 {
        (self.c_miss * self.pi_tar * r.p_miss + self.c_fa_non * self.pi_non * r.p_fa_non + self.c_fa_spf * self.pi_spf * r.p_fa_spf) / self.normalizer()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRates {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa_non: f64,
    pub p_fa_spf: f64,
}

/// A metric value and the threshold realising it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub value: f64,
    pub threshold: f64,
}

fn require(c: &ClassScores, labels: &[TrialLabel]) -> Result<()> {
    for &l in labels {
        if c.get(l).is_empty() {
            return Err(Error::contract(format!("no {l} scores")));
        }
    }
    Ok(())
}

/// Rates at threshold `t`; a trial is accepted iff its score exceeds `t`.
pub fn error_rates_at(c: &ClassScores, t: f64) -> Result<ErrorRates> {
    require(c, &TrialLabel::ALL)?;
    let frac = |v: &[f64], f: &dyn Fn(f64) -> bool| v.iter().filter(|&&s| f(s)).count() as f64 / v.len() as f64;
    Ok(ErrorRates {
        threshold: t,
        p_miss: frac(c.target(), &|s| s <= t),
        p_fa_non: frac(c.nontarget(), &|s| s > t),
        p_fa_spf: frac(c.spoof(), &|s| s > t),
    })
}

fn below(x: f64) -> f64 {
    let t = x - 1.0;
    if t < x {
        t
    } else {
        x.next_down()
    }
}

fn above(x: f64) -> f64 {
    let t = x + 1.0;
    if t > x {
        t
    } else {
        x.next_up()
    }
}

/// Count tables at every candidate threshold, ascending.
struct Sweep {
    thresholds: Vec<f64>,
    /// Targets at or below the threshold.
    miss: Vec<usize>,
    /// Non-targets and spoofs above the threshold.
    fa_non: Vec<usize>,
    fa_spf: Vec<usize>,
}

fn sweep(c: &ClassScores) -> Sweep {
    let mut all: Vec<(f64, usize)> = TrialLabel::ALL
        .iter()
        .flat_map(|&l| c.get(l).iter().map(move |&s| (s, l.index())))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let [_, n_non, n_spf] = c.counts();
    let mut sw = Sweep {
        thresholds: Vec::with_capacity(all.len() + 1),
        miss: Vec::with_capacity(all.len() + 1),
        fa_non: Vec::with_capacity(all.len() + 1),
        fa_spf: Vec::with_capacity(all.len() + 1),
    };
    if all.is_empty() {
        return sw;
    }
    let (mut miss, mut fa) = (0, [n_non, n_spf]);
    sw.thresholds.push(below(all[0].0));
    sw.miss.push(miss);
    sw.fa_non.push(fa[0]);
    sw.fa_spf.push(fa[1]);
    let mut i = 0;
    while i < all.len() {
        let v = all[i].0;
        while i < all.len() && all[i].0 == v {
            match all[i].1 {
                0 => miss += 1,
                k => fa[k - 1] -= 1,
            }
            i += 1;
        }
        let t = match all.get(i) {
            Some(&(next, _)) => {
                let mut mid = (v + next) / 2.0;
                if !mid.is_finite() {
                    mid = v / 2.0 + next / 2.0;
                }
                // adjacent floats: the midpoint rounds onto `next`
                if mid < next {
                    mid
                } else {
                    v
                }
            }
            None => above(v),
        };
        sw.thresholds.push(t);
        sw.miss.push(miss);
        sw.fa_non.push(fa[0]);
        sw.fa_spf.push(fa[1]);
    }
    sw
}

/// Sentinels below and above all scores plus midpoints of consecutive
/// distinct scores, ascending.
pub fn candidate_thresholds(c: &ClassScores) -> Vec<f64> {
    sweep(c).thresholds
}

/// Equal error rate between target rejection and pooled non-target/spoof
/// acceptance, interpolated linearly between bracketing thresholds.
pub fn sasv_eer(c: &ClassScores) -> Result<OperatingPoint> {
    let [n_tar, n_non, n_spf] = c.counts();
    if n_tar == 0 || n_non + n_spf == 0 {
        return Err(Error::contract("equal error rate needs target and non-target scores"));
    }
    let sw = sweep(c);
    let frr = |k: usize| sw.miss[k] as f64 / n_tar as f64;
    let far = |k: usize| (sw.fa_non[k] + sw.fa_spf[k]) as f64 / (n_non + n_spf) as f64;
    // frr(0) = 0 < far(0) = 1 and frr(last) = 1 > far(last) = 0
    let k = (1..sw.thresholds.len()).find(|&k| frr(k) >= far(k)).expect("rates cross by the last candidate");
    let (a0, b0, a1, b1) = (frr(k - 1), far(k - 1), frr(k), far(k));
    let alpha = (b0 - a0) / ((b0 - a0) + (a1 - b1));
    let (t0, t1) = (sw.thresholds[k - 1], sw.thresholds[k]);
    Ok(OperatingPoint {
        value: a0 + alpha * (a1 - a0),
        threshold: t0 + alpha * (t1 - t0),
    })
}

/// Minimum normalized a-DCF over all candidate thresholds; ties go to the
/// smallest threshold.
pub fn min_adcf(c: &ClassScores, cfg: &ADcfConfig) -> Result<OperatingPoint> {
    cfg.validate()?;
    require(c, &TrialLabel::ALL)?;
    let [n_tar, n_non, n_spf] = c.counts();
    let sw = sweep(c);
    let mut best = OperatingPoint {
        value: f64::INFINITY,
        threshold: f64::NAN,
    };
    for k in 0..sw.thresholds.len() {
        let r = ErrorRates {
            threshold: sw.thresholds[k],
            p_miss: sw.miss[k] as f64 / n_tar as f64,
            p_fa_non: sw.fa_non[k] as f64 / n_non as f64,
            p_fa_spf: sw.fa_spf[k] as f64 / n_spf as f64,
        };
        let v = cfg.cost(&r);
        if v < best.value {
            best = OperatingPoint { value: v, threshold: r.threshold };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cs(t: &[f64], n: &[f64], s: &[f64]) -> ClassScores {
        ClassScores::new(t.to_vec(), n.to_vec(), s.to_vec()).unwrap()
    }

    /// Exhaustive reference: every candidate threshold, rates counted from scratch.
    fn oracle_thresholds(c: &ClassScores) -> Vec<f64> {
        let mut v: Vec<f64> = c.target().iter().chain(c.nontarget()).chain(c.spoof()).copied().collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        let mut t = vec![v[0] - 1.0];
        t.extend(v.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        t.push(v[v.len() - 1] + 1.0);
        t
    }

    fn oracle_rates(c: &ClassScores, t: f64) -> (f64, f64, f64, f64) {
        let above = |v: &[f64]| v.iter().filter(|&&s| s > t).count();
        let tar = c.target().len() as f64;
        let imp = (c.nontarget().len() + c.spoof().len()) as f64;
        let frr = (c.target().len() - above(c.target())) as f64 / tar;
        let far = (above(c.nontarget()) + above(c.spoof())) as f64 / imp;
        let non = above(c.nontarget()) as f64 / c.nontarget().len().max(1) as f64;
        let spf = above(c.spoof()) as f64 / c.spoof().len().max(1) as f64;
        (frr, far, non, spf)
    }

    fn oracle_eer(c: &ClassScores) -> f64 {
        let ts = oracle_thresholds(c);
        let pts: Vec<(f64, f64)> = ts.iter().map(|&t| {
            let (frr, far, _, _) = oracle_rates(c, t);
            (frr, far)
        }).collect();
        for k in 1..pts.len() {
            let (a1, b1) = pts[k];
            if a1 >= b1 {
                let (a0, b0) = pts[k - 1];
                // intersection of the segment (a0,b0)-(a1,b1) with frr = far
                let alpha = (b0 - a0) / ((b0 - a0) - (b1 - a1));
                return a0 + alpha * (a1 - a0);
            }
        }
        unreachable!()
    }

    fn oracle_adcf(c: &ClassScores, cfg: &ADcfConfig) -> (f64, f64) {
        let mut best = (f64::INFINITY, 0.0);
        for t in oracle_thresholds(c) {
            let (frr, _, non, spf) = oracle_rates(c, t);
            let num = cfg.c_miss * cfg.pi_tar * frr + cfg.c_fa_non * cfg.pi_non * non + cfg.c_fa_spf * cfg.pi_spf * spf;
            let den = (cfg.c_miss * cfg.pi_tar).min(cfg.c_fa_non * cfg.pi_non + cfg.c_fa_spf * cfg.pi_spf);
            if num / den < best.0 {
                best = (num / den, t);
            }
        }
        best
    }

    fn random_set(rng: &mut ChaCha8Rng, max: usize) -> ClassScores {
        let mut class = |lo: f64, hi: f64| -> Vec<f64> {
            let n = rng.random_range(1..=max);
            // coarse grid to provoke ties now and then
            let grid = rng.random_bool(0.3);
            (0..n)
                .map(|_| {
                    let x = rng.random_range(lo..hi);
                    if grid { (x * 20.0).round() / 20.0 } else { x }
                })
                .collect()
        };
        let t = class(0.3, 1.0);
        let n = class(0.0, 0.7);
        let s = class(0.1, 0.9);
        ClassScores::new(t, n, s).unwrap()
    }

    #[test]
    fn extreme_and_separable_thresholds() {
        let c = cs(&[0.9, 0.8], &[0.1], &[0.2, 0.3]);
        let r = error_rates_at(&c, -5.0).unwrap();
        assert_eq!((r.p_miss, r.p_fa_non, r.p_fa_spf), (0.0, 1.0, 1.0));
        let r = error_rates_at(&c, 5.0).unwrap();
        assert_eq!((r.p_miss, r.p_fa_non, r.p_fa_spf), (1.0, 0.0, 0.0));
        let r = error_rates_at(&cs(&[0.9], &[0.1], &[0.2]), 0.5).unwrap();
        assert_eq!((r.p_miss, r.p_fa_non, r.p_fa_spf), (0.0, 0.0, 0.0));
        // strict acceptance: a score equal to the threshold is rejected
        assert_eq!(error_rates_at(&c, 0.8).unwrap().p_miss, 0.5);
        assert!(error_rates_at(&cs(&[0.9], &[], &[0.2]), 0.5).is_err());
    }

    #[test]
    fn eer_reference_cases() {
        assert_eq!(sasv_eer(&cs(&[0.8, 0.9], &[0.1], &[0.2])).unwrap().value, 0.0);
        let same = [0.1, 0.4, 0.4, 0.7];
        assert_eq!(sasv_eer(&cs(&same, &same[..2], &same[2..])).unwrap().value, 0.5);
        assert!(sasv_eer(&cs(&[], &[0.1], &[])).is_err());
        assert!(sasv_eer(&cs(&[0.1], &[], &[])).is_err());
        // no spoof class is fine for the pooled rate
        assert_eq!(sasv_eer(&cs(&[0.8], &[0.1], &[])).unwrap().value, 0.0);
        // fully inverted scores
        assert_eq!(sasv_eer(&cs(&[0.1], &[0.9], &[0.8])).unwrap().value, 1.0);
    }

    #[test]
    fn eer_interpolates() {
        // targets {1, 3}, impostor {2}: frr/far at candidates
        // t0: (0, 1), t1=1.5: (0.5, 1), t2=2.5: (0.5, 0) -> crossing at 0.5
        let c = cs(&[1.0, 3.0], &[2.0], &[]);
        let op = sasv_eer(&c).unwrap();
        assert_eq!(op.value, 0.5);
        // targets {1,4,5}, impostors {2,3}: (1/3, 1) -> (1/3, 0.5) -> (1/3, 0): crossing inside
        let c = cs(&[1.0, 4.0, 5.0], &[2.0, 3.0], &[]);
        let op = sasv_eer(&c).unwrap();
        assert!((op.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(op.value, oracle_eer(&c));
    }

    #[test]
    fn adcf_reference_cases() {
        let cfg = ADcfConfig::default();
        let op = min_adcf(&cs(&[0.8, 0.9], &[0.1], &[0.2]), &cfg).unwrap();
        assert_eq!(op.value, 0.0);
        assert!(op.threshold > 0.2 && op.threshold < 0.8);
        // identical everything: best trivial system
        let op = min_adcf(&cs(&[0.5], &[0.5], &[0.5]), &cfg).unwrap();
        assert_eq!(op.value, 1.0);
        assert!(op.threshold < 0.5, "tie goes to the smallest threshold");
        assert!(min_adcf(&cs(&[0.5], &[0.5], &[]), &cfg).is_err());
        let bad = ADcfConfig { pi_tar: 0.5, ..cfg };
        assert!(matches!(min_adcf(&cs(&[0.5], &[0.5], &[0.5]), &bad), Err(Error::Config(_))));
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cfg = ADcfConfig::default();
        for _ in 0..60 {
            let c = random_set(&mut rng, 200);
            let eer = sasv_eer(&c).unwrap();
            assert!((eer.value - oracle_eer(&c)).abs() <= 1e-12);
            let (v, t) = oracle_adcf(&c, &cfg);
            let op = min_adcf(&c, &cfg).unwrap();
            assert!((op.value - v).abs() <= 1e-12);
            assert_eq!(op.threshold, t);
        }
    }

    #[test]
    fn huge_magnitudes_keep_sentinels_outside() {
        let c = cs(&[f64::MAX], &[-f64::MAX], &[1e300]);
        let t = candidate_thresholds(&c);
        assert!(t[0] < -f64::MAX);
        assert!(*t.last().unwrap() > f64::MAX || t.last().unwrap().is_infinite());
        assert_eq!(sasv_eer(&c).unwrap().value, 0.0);
        // adjacent floats still get a separating threshold
        let a = 0.5f64;
        let c = cs(&[a.next_up()], &[a], &[a]);
        assert_eq!(min_adcf(&c, &ADcfConfig::default()).unwrap().value, 0.0);
    }

    proptest! {
        #[test]
        fn adcf_in_unit_interval_and_rates_monotone(
            t in proptest::collection::vec(-3.0f64..3.0, 1..40),
            n in proptest::collection::vec(-3.0f64..3.0, 1..40),
            s in proptest::collection::vec(-3.0f64..3.0, 1..40),
        ) {
            let c = cs(&t, &n, &s);
            let v = min_adcf(&c, &ADcfConfig::default()).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&v));
            let ts = candidate_thresholds(&c);
            let rates: Vec<ErrorRates> = ts.iter().map(|&x| error_rates_at(&c, x).unwrap()).collect();
            for w in rates.windows(2) {
                prop_assert!(w[0].p_miss <= w[1].p_miss);
                prop_assert!(w[0].p_fa_non >= w[1].p_fa_non);
                prop_assert!(w[0].p_fa_spf >= w[1].p_fa_spf);
            }
            let e = sasv_eer(&c).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn invariant_under_increasing_transform(
            t in proptest::collection::vec(-2.0f64..2.0, 1..40),
            n in proptest::collection::vec(-2.0f64..2.0, 1..40),
            s in proptest::collection::vec(-2.0f64..2.0, 1..40),
        ) {
            let c = cs(&t, &n, &s);
            let cube = |v: &[f64]| v.iter().map(|x| x * x * x + 2.0 * x).collect::<Vec<_>>();
            let d = cs(&cube(&t), &cube(&n), &cube(&s));
            let cfg = ADcfConfig::default();
            prop_assert!((sasv_eer(&c).unwrap().value - sasv_eer(&d).unwrap().value).abs() <= 1e-12);
            prop_assert!((min_adcf(&c, &cfg).unwrap().value - min_adcf(&d, &cfg).unwrap().value).abs() <= 1e-12);
        }
    }
}
