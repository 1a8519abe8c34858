//! Arm populations for the three experiment domains.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, State, TransitionKernel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSemantics {
    /// The configured noise level is the standard deviation.
    Std,
    /// The configured noise level is the variance.
    Variance,
}

/// Two-archetype CPAP-adherence population.
///
/// Each archetype is given by its no-pull probabilities of reaching the good
/// state, `[P(bad, idle, good), P(good, idle, good)]`; the pull slice is the
/// no-pull slice scaled by `alpha_h` and capped at one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpapParams {
    pub alpha_h: f64,
    pub non_adherer_fraction: f64,
    pub noise: f64,
    pub noise_semantics: NoiseSemantics,
    /// Exactly `floor(fraction * n)` non-adherers instead of a per-arm coin.
    pub exact_non_adherer_count: bool,
    pub adherent_idle: [f64; 2],
    pub non_adherent_idle: [f64; 2],
}

impl Default for CpapParams {
    fn default() -> Self {
        Self {
            alpha_h: 1.1,
            non_adherer_fraction: 0.3,
            noise: 0.1,
            noise_semantics: NoiseSemantics::Std,
            exact_non_adherer_count: true,
            adherent_idle: [0.35, 0.80],
            non_adherent_idle: [0.10, 0.55],
        }
    }
}

impl CpapParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_h >= 1.0 && self.alpha_h.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha_h must be >= 1, got {}", self.alpha_h)));
        }
        if !(0.0..=1.0).contains(&self.non_adherer_fraction) {
            return Err(Error::InvalidConfig(format!(
                "non-adherer fraction must be in [0, 1], got {}",
                self.non_adherer_fraction
            )));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise must be >= 0, got {}", self.noise)));
        }
        for (name, base) in [("adherent", self.adherent_idle), ("non-adherent", self.non_adherent_idle)] {
            if base.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidKernel(format!("{name} base probabilities {base:?}")));
            }
        }
        Ok(())
    }

    pub fn noise_std(&self) -> f64 {
        match self.noise_semantics {
            NoiseSemantics::Std => self.noise,
            NoiseSemantics::Variance => self.noise.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum DomainSpec {
    Synthetic,
    SyntheticAlternate,
    Cpap(CpapParams),
}

impl DomainSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DomainSpec::Synthetic => "synthetic",
            DomainSpec::SyntheticAlternate => "synthetic-alternate",
            DomainSpec::Cpap(_) => "cpap",
        }
    }

    pub fn generate<R: Rng + ?Sized>(&self, n: usize, epsilon: f64, rng: &mut R) -> Result<Vec<TransitionKernel>> {
        match self {
            DomainSpec::Synthetic => gen_synthetic(n, epsilon, rng),
            DomainSpec::SyntheticAlternate => gen_synthetic_alternate(n, epsilon, rng),
            DomainSpec::Cpap(params) => gen_cpap(n, params, epsilon, rng),
        }
    }
}

fn check_population(n: usize, epsilon: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!("need at least two arms, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::InvalidConfig(format!("epsilon must be in (0, 0.5), got {epsilon}")));
    }
    Ok(())
}

/// Clamps every `P(s, a, good)` to `[epsilon, 1 - epsilon]`.
pub fn clip_nondegenerate(kernel: &TransitionKernel, epsilon: f64) -> Result<TransitionKernel> {
    let mut good = kernel.good_probs();
    for row in good.iter_mut() {
        for p in row.iter_mut() {
            *p = p.clamp(epsilon, 1.0 - epsilon);
        }
    }
    TransitionKernel::non_degenerate(good, epsilon)
}

fn finish(good: [[f64; 2]; 2], epsilon: f64) -> Result<TransitionKernel> {
    clip_nondegenerate(&TransitionKernel::from_good_probs(good)?, epsilon)
}

/// Every `P(s, a, good)` drawn uniformly from `[0, 1]`, then clipped.
pub fn gen_synthetic<R: Rng + ?Sized>(n: usize, epsilon: f64, rng: &mut R) -> Result<Vec<TransitionKernel>> {
    check_population(n, epsilon)?;
    (0..n)
        .map(|_| {
            let mut good = [[0.0; 2]; 2];
            for row in good.iter_mut() {
                for p in row.iter_mut() {
                    *p = rng.random();
                }
            }
            finish(good, epsilon)
        })
        .collect()
}

/// Uniform draws arranged so that pulling never hurts
/// (`P(s, pull, good) >= P(s, idle, good)`) and starting good never hurts
/// (`P(good, a, good) >= P(bad, a, good)`).
///
/// Four uniforms are sorted; the smallest goes to `(bad, idle)`, the largest
/// to `(good, pull)` and the middle two to `(bad, pull)` and `(good, idle)`
/// in random order.
pub fn gen_synthetic_alternate<R: Rng + ?Sized>(
    n: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<TransitionKernel>> {
    check_population(n, epsilon)?;
    (0..n)
        .map(|_| {
            let mut u: [f64; 4] = std::array::from_fn(|_| rng.random());
            u.sort_by(f64::total_cmp);
            let (bad_pull, good_idle) = if rng.random::<bool>() { (u[1], u[2]) } else { (u[2], u[1]) };
            finish([[u[0], bad_pull], [good_idle, u[3]]], epsilon)
        })
        .collect()
}

/// CPAP-adherence population: adherent and non-adherent archetypes with
/// per-entry Gaussian heterogeneity.
pub fn gen_cpap<R: Rng + ?Sized>(
    n: usize,
    params: &CpapParams,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<TransitionKernel>> {
    check_population(n, epsilon)?;
    params.validate()?;

    let non_adherent: Vec<bool> = if params.exact_non_adherer_count {
        let count = (params.non_adherer_fraction * n as f64 + 1e-9).floor() as usize;
        let mut flags: Vec<bool> = (0..n).map(|i| i < count).collect();
        flags.shuffle(rng);
        flags
    } else {
        (0..n).map(|_| rng.random::<f64>() < params.non_adherer_fraction).collect()
    };

    let sigma = params.noise_std();
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidConfig(e.to_string()))?;

    non_adherent
        .into_iter()
        .map(|is_non| {
            let idle = if is_non { params.non_adherent_idle } else { params.adherent_idle };
            let mut good = [[0.0; 2]; 2];
            for s in State::ALL {
                let base = idle[s.index()];
                good[s.index()][Action::Idle.index()] = base;
                good[s.index()][Action::Pull.index()] = (params.alpha_h * base).min(1.0);
            }
            if sigma > 0.0 {
                for row in good.iter_mut() {
                    for p in row.iter_mut() {
                        *p = (*p + noise.sample(rng)).clamp(0.0, 1.0);
                    }
                }
            }
            finish(good, epsilon)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::arm_reward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EPS: f64 = 0.01;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn in_range(k: &TransitionKernel) -> bool {
        k.tensor().iter().flatten().flatten().all(|&p| (EPS - 1e-15..=1.0 - EPS + 1e-15).contains(&p))
    }

    #[test]
    fn clipping() {
        let k = TransitionKernel::from_good_probs([[0.0, 0.5], [1.0, 0.3]]).unwrap();
        let c = clip_nondegenerate(&k, EPS).unwrap();
        assert_eq!(c.good_probs(), [[EPS, 0.5], [1.0 - EPS, 0.3]]);
        assert_eq!(c.prob(State::Bad, Action::Idle, State::Bad), 1.0 - EPS);
        assert_eq!(clip_nondegenerate(&c, EPS).unwrap(), c);
        assert_eq!(c.epsilon(), Some(EPS));
    }

    #[test]
    fn synthetic_population() {
        let ks = gen_synthetic(50, EPS, &mut rng(1)).unwrap();
        assert_eq!(ks.len(), 50);
        assert!(ks.iter().all(in_range));
        assert_eq!(ks, gen_synthetic(50, EPS, &mut rng(1)).unwrap());
        assert_ne!(ks, gen_synthetic(50, EPS, &mut rng(2)).unwrap());
        assert!(gen_synthetic(1, EPS, &mut rng(1)).is_err());
    }

    #[test]
    fn synthetic_mean_is_one_half() {
        let ks = gen_synthetic(2_500, EPS, &mut rng(4)).unwrap();
        let entries: Vec<f64> = ks.iter().flat_map(|k| k.good_probs().into_iter().flatten()).collect();
        assert_eq!(entries.len(), 10_000);
        let mean = entries.iter().sum::<f64>() / entries.len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn alternate_dominance() {
        let ks = gen_synthetic_alternate(500, EPS, &mut rng(3)).unwrap();
        for k in &ks {
            assert!(in_range(k));
            for s in State::ALL {
                assert!(k.to_good(s, Action::Pull) >= k.to_good(s, Action::Idle));
            }
            for a in Action::ALL {
                assert!(k.to_good(State::Good, a) >= k.to_good(State::Bad, a));
            }
            assert!(arm_reward(k).unwrap().value() >= 0.0);
        }
        assert_eq!(ks, gen_synthetic_alternate(500, EPS, &mut rng(3)).unwrap());
    }

    #[test]
    fn cpap_without_intervention_benefit() {
        let p = CpapParams {
            alpha_h: 1.0,
            noise: 0.0,
            ..Default::default()
        };
        for k in gen_cpap(20, &p, EPS, &mut rng(5)).unwrap() {
            assert_eq!(arm_reward(&k).unwrap().value(), 0.0);
        }
    }

    #[test]
    fn cpap_noise_free_has_two_archetypes() {
        let p = CpapParams {
            noise: 0.0,
            ..Default::default()
        };
        let ks = gen_cpap(20, &p, EPS, &mut rng(6)).unwrap();
        let mut distinct: Vec<TransitionKernel> = Vec::new();
        for k in ks {
            if !distinct.contains(&k) {
                distinct.push(k);
            }
        }
        assert_eq!(distinct.len(), 2);
    }

    #[test]
    fn cpap_defaults_split_and_vary() {
        let p = CpapParams::default();
        let n = 100;
        let quiet = CpapParams { noise: 0.0, ..p };
        let ks = gen_cpap(n, &quiet, EPS, &mut rng(8)).unwrap();
        let non = ks
            .iter()
            .filter(|k| k.to_good(State::Bad, Action::Idle) == p.non_adherent_idle[0])
            .count();
        assert_eq!(non, 30);

        let noisy = gen_cpap(n, &p, EPS, &mut rng(8)).unwrap();
        assert!(noisy.iter().all(in_range));
        for i in 1..n {
            assert_ne!(noisy[i], noisy[0]);
        }
    }

    #[test]
    fn cpap_validation() {
        let bad = CpapParams {
            alpha_h: 0.9,
            ..Default::default()
        };
        assert!(gen_cpap(10, &bad, EPS, &mut rng(1)).is_err());
        let bad = CpapParams {
            adherent_idle: [1.2, 0.3],
            ..Default::default()
        };
        assert!(matches!(gen_cpap(10, &bad, EPS, &mut rng(1)), Err(Error::InvalidKernel(_))));
        let var = CpapParams {
            noise_semantics: NoiseSemantics::Variance,
            ..Default::default()
        };
        assert!((var.noise_std() - 0.1f64.sqrt()).abs() < 1e-15);
    }
}
