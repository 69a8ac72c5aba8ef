use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Hypergeometric};
use rayon::prelude::*;

/// Draws how many of `success` marked items land in a uniform sample of
/// `draws` out of `total`. Small-mode cases use an inverse transform that
/// starts from a log-space P(X = 0); the library sampler's setup for that
/// regime overflows on populations of millions.
pub(crate) fn sample_hypergeometric<R: Rng + ?Sized>(
    rng: &mut R,
    total: u64,
    success: u64,
    draws: u64,
) -> u64 {
    debug_assert!(success <= total && draws <= total);
    if success == 0 || draws == 0 {
        return 0;
    }
    if success == total {
        return draws;
    }
    if draws == total {
        return success;
    }
    if success > total / 2 {
        return draws - sample_hypergeometric(rng, total, total - success, draws);
    }
    if draws > total / 2 {
        return success - sample_hypergeometric(rng, total, success, total - draws);
    }
    let (t, s, d) = (total as f64, success as f64, draws as f64);
    let mode = ((d + 1.0) * (s + 1.0) / (t + 2.0)).floor();
    if mode >= 10.0 {
        return Hypergeometric::new(total, success, draws)
            .expect("parameters are consistent")
            .sample(rng);
    }
    let ln_p0 = libm::lgamma(t - s + 1.0) - libm::lgamma(t - s - d + 1.0) - libm::lgamma(t + 1.0)
        + libm::lgamma(t - d + 1.0);
    let mut p = ln_p0.exp();
    let mut cdf = p;
    let u: f64 = rng.random();
    let hi = success.min(draws);
    let mut x = 0;
    while u > cdf && x < hi {
        let xf = x as f64;
        p *= (s - xf) * (d - xf) / ((xf + 1.0) * (t - s - d + xf + 1.0));
        x += 1;
        cdf += p;
    }
    x
}

/// Fraction of row groups holding at least one matching row when
/// `round(sf * rows)` matches are placed uniformly without replacement over
/// `group_count` groups of `rows_per_group` rows. Averaged over `trials`;
/// every trial draws from its own stream of the seeded generator, so the
/// result does not depend on thread scheduling.
pub fn monte_carlo_rg_hit(
    rows_per_group: u64,
    group_count: u64,
    sf: f64,
    trials: u64,
    seed: u64,
) -> f64 {
    let total = rows_per_group.saturating_mul(group_count);
    if total == 0 || trials == 0 || sf <= 0.0 {
        return 0.0;
    }
    if sf >= 1.0 {
        return 1.0;
    }
    let matches = ((sf * total as f64).round() as u64).min(total);
    if matches == 0 {
        return 0.0;
    }
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            groups_hit(rows_per_group, group_count, matches, &mut rng)
        })
        .sum();
    hits as f64 / (trials as f64 * group_count as f64)
}

/// Draws the match count of each group in turn from what is left.
fn groups_hit(rows_per_group: u64, groups: u64, matches: u64, rng: &mut ChaCha8Rng) -> u64 {
    let mut rows_left = rows_per_group * groups;
    let mut matches_left = matches;
    let mut hit = 0;
    for _ in 0..groups {
        if matches_left == 0 {
            break;
        }
        if matches_left == rows_left {
            hit += 1;
            rows_left -= rows_per_group;
            matches_left -= rows_per_group;
            continue;
        }
        let k = sample_hypergeometric(rng, rows_left, matches_left, rows_per_group);
        if k > 0 {
            hit += 1;
        }
        rows_left -= rows_per_group;
        matches_left -= k;
    }
    hit
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundaries_are_exact() {
        assert_eq!(monte_carlo_rg_hit(1000, 10, 0.0, 100, 1), 0.0);
        assert_eq!(monte_carlo_rg_hit(1000, 10, 1.0, 100, 1), 1.0);
        assert_eq!(monte_carlo_rg_hit(0, 10, 0.5, 100, 1), 0.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let a = monte_carlo_rg_hit(10_000, 50, 1e-4, 2_000, 7);
        let b = monte_carlo_rg_hit(10_000, 50, 1e-4, 2_000, 7);
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (t, s, d) in [
            (10_000_000u64, 100u64, 100_000u64),
            (10_000_000, 1_900_000, 100_000),
            (10_000_000, 9_200_000, 100_000),
            (1_000, 30, 900),
            (50, 7, 5),
        ] {
            let n = 20_000;
            let draws: Vec<f64> = (0..n)
                .map(|_| sample_hypergeometric(&mut rng, t, s, d) as f64)
                .collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let (tf, sf, df) = (t as f64, s as f64, d as f64);
            let exp_mean = df * sf / tf;
            let var = df * sf / tf * (1.0 - sf / tf) * (tf - df) / (tf - 1.0);
            let se = (var / n as f64).sqrt();
            assert!((mean - exp_mean).abs() <= 5.0 * se + 1e-9, "{t} {s} {d}: {mean} vs {exp_mean}");
            assert!(draws.iter().all(|&x| x <= sf.min(df)));
        }
    }

    #[test]
    fn single_match_hits_one_group() {
        // 1 of 10_000 rows matches: exactly one of the 10 groups is hit.
        let f = monte_carlo_rg_hit(1_000, 10, 1e-4, 500, 3);
        assert_eq!(f, 0.1);
    }
}
