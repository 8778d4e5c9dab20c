//! Dirichlet conjugate posterior over the unknown transition kernel.
//!
//! One symmetric Dirichlet per state-action pair over the `S + 1` successor
//! outcomes. Observing a transition increments one concentration entry by
//! exactly one; sampling normalizes independent Gamma draws per row.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PosteriorError {
    #[error("prior_alpha must be > 0, got {0}")]
    NonpositiveAlpha(f64),
    #[error("{what} index {value} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },
}

/// Per-(state, action) Dirichlet concentrations over successor states.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletBelief<T> {
    num_states: usize,
    num_actions: usize,
    prior_alpha: T,
    /// `S x A x (S + 1)`, row-major.
    concentrations: Vec<T>,
}

impl<T: Scalar> DirichletBelief<T> {
    /// Fresh symmetric belief with every concentration equal to `prior_alpha`.
    pub fn new(
        num_states: usize,
        num_actions: usize,
        prior_alpha: T,
    ) -> Result<Self, PosteriorError> {
        if prior_alpha <= T::zero() || prior_alpha.is_nan() {
            return Err(PosteriorError::NonpositiveAlpha(
                prior_alpha.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(DirichletBelief {
            num_states,
            num_actions,
            prior_alpha,
            concentrations: vec![prior_alpha; num_states * num_actions * (num_states + 1)],
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn prior_alpha(&self) -> T {
        self.prior_alpha
    }

    fn row_len(&self) -> usize {
        self.num_states + 1
    }

    fn check_pair(&self, state: usize, action: usize) -> Result<(), PosteriorError> {
        if state >= self.num_states {
            return Err(PosteriorError::IndexOutOfRange {
                what: "state",
                value: state,
                limit: self.num_states,
            });
        }
        if action >= self.num_actions {
            return Err(PosteriorError::IndexOutOfRange {
                what: "action",
                value: action,
                limit: self.num_actions,
            });
        }
        Ok(())
    }

    /// Concentration vector for one state-action pair.
    pub fn concentration_row(&self, state: usize, action: usize) -> &[T] {
        let base = (state * self.num_actions + action) * self.row_len();
        &self.concentrations[base..base + self.row_len()]
    }

    pub fn concentrations(&self) -> &[T] {
        &self.concentrations
    }

    /// Conjugate update: add one to the concentration of the observed
    /// transition, leaving every other entry untouched.
    pub fn update(
        &mut self,
        state: usize,
        action: usize,
        successor: usize,
    ) -> Result<(), PosteriorError> {
        self.check_pair(state, action)?;
        if successor > self.num_states {
            return Err(PosteriorError::IndexOutOfRange {
                what: "successor",
                value: successor,
                limit: self.num_states + 1,
            });
        }
        let idx = (state * self.num_actions + action) * self.row_len() + successor;
        self.concentrations[idx] += T::one();
        Ok(())
    }

    /// Draw one kernel table: each row independently Dirichlet-distributed,
    /// realized as normalized Gamma draws. Zero draws (possible by underflow
    /// at tiny shapes) are rejected and redrawn, so every sampled row puts
    /// strictly positive mass on every successor.
    pub fn sample_kernel<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let mut kernel = Vec::with_capacity(self.concentrations.len());
        let row_len = self.row_len();
        for row in self.concentrations.chunks(row_len) {
            let start = kernel.len();
            let mut total = T::zero();
            for &shape in row {
                let g = loop {
                    let draw = T::sample_standard_gamma(rng, shape);
                    if draw > T::zero() {
                        break draw;
                    }
                };
                total += g;
                kernel.push(g);
            }
            for entry in &mut kernel[start..] {
                *entry /= total;
            }
        }
        kernel
    }

    /// Row-normalized concentrations.
    pub fn posterior_mean(&self) -> Vec<T> {
        let mut mean = Vec::with_capacity(self.concentrations.len());
        for row in self.concentrations.chunks(self.row_len()) {
            let total: T = row.iter().copied().sum();
            mean.extend(row.iter().map(|&c| c / total));
        }
        mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fresh_belief_has_uniform_concentrations() {
        let b = DirichletBelief::<f64>::new(8, 2, 0.1).unwrap();
        assert_eq!(b.concentrations().len(), 8 * 2 * 9);
        assert!(b.concentrations().iter().all(|&c| c == 0.1));
        let tiny = DirichletBelief::<f64>::new(1, 1, 1.0).unwrap();
        assert_eq!(tiny.concentration_row(0, 0), &[1.0, 1.0]);
    }

    #[test]
    fn nonpositive_alpha_is_rejected() {
        assert!(matches!(
            DirichletBelief::<f64>::new(2, 1, 0.0),
            Err(PosteriorError::NonpositiveAlpha(_))
        ));
        assert!(matches!(
            DirichletBelief::<f64>::new(2, 1, -1.0),
            Err(PosteriorError::NonpositiveAlpha(_))
        ));
    }

    #[test]
    fn update_increments_exactly_one_entry() {
        let mut b = DirichletBelief::<f64>::new(2, 1, 0.1).unwrap();
        b.update(0, 0, 2).unwrap();
        assert_eq!(b.concentration_row(0, 0), &[0.1, 0.1, 1.1]);
        assert_eq!(b.concentration_row(1, 0), &[0.1, 0.1, 0.1]);
        b.update(0, 0, 2).unwrap();
        assert_eq!(b.concentration_row(0, 0), &[0.1, 0.1, 2.1]);
    }

    #[test]
    fn update_rejects_out_of_range_indices() {
        let mut b = DirichletBelief::<f64>::new(2, 1, 0.1).unwrap();
        assert!(b.update(2, 0, 0).is_err());
        assert!(b.update(0, 1, 0).is_err());
        assert!(b.update(0, 0, 3).is_err());
    }

    #[test]
    fn posterior_mean_is_smoothed_empirical_frequency() {
        // Five observations on one row: successors 0, 0, 1, 2, 2.
        let mut b = DirichletBelief::<f64>::new(2, 1, 0.5).unwrap();
        for s_next in [0, 0, 1, 2, 2] {
            b.update(0, 0, s_next).unwrap();
        }
        let mean = b.posterior_mean();
        let expected = [2.5 / 6.5, 1.5 / 6.5, 2.5 / 6.5];
        for (m, e) in mean[..3].iter().zip(expected) {
            assert!((m - e).abs() < 1e-15);
        }
        // Untouched row stays at the prior mean.
        for m in &mean[3..] {
            assert!((m - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn posterior_mean_normalizes_single_row() {
        let mut b = DirichletBelief::<f64>::new(1, 1, 0.1).unwrap();
        b.update(0, 0, 0).unwrap();
        let mean = b.posterior_mean();
        assert!((mean[0] - 11.0 / 12.0).abs() < 1e-12);
        assert!((mean[1] - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_deterministic_given_the_rng_state() {
        let b = DirichletBelief::<f64>::new(3, 2, 0.1).unwrap();
        let a = b.sample_kernel(&mut ChaCha8Rng::seed_from_u64(12));
        let c = b.sample_kernel(&mut ChaCha8Rng::seed_from_u64(12));
        assert_eq!(a, c);
        let d = b.sample_kernel(&mut ChaCha8Rng::seed_from_u64(13));
        assert_ne!(a, d);
    }

    #[test]
    fn sampled_rows_are_probability_vectors_with_positive_goal_mass() {
        let mut b = DirichletBelief::<f64>::new(4, 2, 0.1).unwrap();
        b.update(0, 0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let kernel = b.sample_kernel(&mut rng);
            for row in kernel.chunks(5) {
                let sum: f64 = row.iter().sum();
                assert!((sum - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p > 0.0));
            }
        }
    }

    #[test]
    fn concentrated_row_dominates_samples() {
        let mut b = DirichletBelief::<f64>::new(1, 1, 0.1).unwrap();
        // Push the first outcome's concentration to 1e9.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let boosted = DirichletBelief {
            concentrations: vec![1e9, 0.1],
            ..b.clone()
        };
        let mut mass = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            mass += boosted.sample_kernel(&mut rng)[0];
        }
        assert!(mass / draws as f64 > 0.999);
        b.update(0, 0, 0).unwrap(); // keep the original belief exercised
    }

    #[test]
    fn conservation_of_counts_is_exact_for_representable_alpha() {
        let mut b = DirichletBelief::<f64>::new(4, 2, 0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let updates = 137;
        for _ in 0..updates {
            let s = (rng.gen::<u64>() % 4) as usize;
            let a = (rng.gen::<u64>() % 2) as usize;
            let n = (rng.gen::<u64>() % 5) as usize;
            b.update(s, a, n).unwrap();
        }
        let total: f64 = b.concentrations().iter().sum();
        let expected = 4.0 * 2.0 * 5.0 * 0.25 + updates as f64;
        assert_eq!(total, expected);
    }

    #[test]
    fn sample_mean_tracks_posterior_mean_after_updates() {
        let mut b = DirichletBelief::<f64>::new(2, 1, 0.1).unwrap();
        for next in [0, 0, 1, 2, 0, 2, 2, 2] {
            b.update(0, 0, next).unwrap();
        }
        let mean = b.posterior_mean();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let draws = 20_000;
        let mut sums = [0.0; 3];
        for _ in 0..draws {
            let kernel = b.sample_kernel(&mut rng);
            for (acc, &p) in sums.iter_mut().zip(&kernel[..3]) {
                *acc += p;
            }
        }
        let alpha0: f64 = b.concentration_row(0, 0).iter().sum();
        for i in 0..3 {
            let m = mean[i];
            let se = (m * (1.0 - m) / (alpha0 + 1.0) / draws as f64).sqrt();
            let empirical = sums[i] / draws as f64;
            assert!(
                (empirical - m).abs() <= 3.0 * se,
                "coordinate {i}: {empirical} vs {m} (3se {})",
                3.0 * se
            );
        }
    }

    #[test]
    fn belief_works_in_f32() {
        let mut b = DirichletBelief::<f32>::new(2, 1, 0.1f32).unwrap();
        b.update(0, 0, 2).unwrap();
        let kernel = b.sample_kernel(&mut ChaCha8Rng::seed_from_u64(3));
        for row in kernel.chunks(3) {
            let sum: f32 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
            assert!(row.iter().all(|&p| p > 0.0));
        }
        let mean = b.posterior_mean();
        assert!((mean[2] - 1.1 / 1.3).abs() < 1e-6);
    }

    #[test]
    fn updates_commute() {
        let observations = [(0, 0, 1), (1, 1, 2), (0, 0, 1), (1, 0, 0), (0, 1, 2)];
        let mut forward = DirichletBelief::<f64>::new(2, 2, 0.1).unwrap();
        let mut backward = forward.clone();
        for &(s, a, n) in &observations {
            forward.update(s, a, n).unwrap();
        }
        for &(s, a, n) in observations.iter().rev() {
            backward.update(s, a, n).unwrap();
        }
        assert_eq!(forward, backward);
    }
}
