//! Sanathanan–Koerner rational fitting in the `z⁻¹` domain.

use crate::error::{Error, Result};
use crate::lti::{poly, DiscreteTransferFunction, FrequencyResponse};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const MAX_ITERATIONS: usize = 50;
const PARAMETER_TOLERANCE: f64 = 1e-8;
/// Relative singular value below which the normal equations count as singular.
const RANK_TOLERANCE: f64 = 1e-13;

/// Diagnostics of one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// weighted squared residual after each accepted iteration (non-increasing)
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// unstable poles were mirrored into the unit disc and the numerator refit
    pub poles_reflected: bool,
    /// residual of the returned model when it differs from the last SK iterate
    pub reflected_residual: Option<f64>,
}

impl FitReport {
    pub fn final_residual(&self) -> f64 {
        self.reflected_residual
            .or_else(|| self.residual_history.last().copied())
            .unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone)]
pub struct RationalFit {
    pub tf: DiscreteTransferFunction,
    pub report: FitReport,
}

struct Problem<'a> {
    zinv: Vec<Complex64>,
    /// FRF with the fixed delay removed
    target: Vec<Complex64>,
    weights: &'a [f64],
    order: usize,
}

impl Problem<'_> {
    fn residual(&self, b: &[f64], a: &[f64]) -> f64 {
        self.zinv
            .iter()
            .zip(&self.target)
            .zip(self.weights)
            .map(|((&x, &h), &w)| (w * (poly::eval(b, x) / poly::eval(a, x) - h)).norm_sqr())
            .sum()
    }

    /// One linearized step: minimise Σ |w/|A_prev| · (B − H·A)|² over b and a₁..aₙ.
    fn sk_step(&self, a_prev: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.order;
        let f = self.zinv.len();
        let cols = 2 * n + 1;
        let mut m = DMatrix::<f64>::zeros(2 * f, cols);
        let mut rhs = DVector::<f64>::zeros(2 * f);
        for (i, ((&x, &h), &w)) in self.zinv.iter().zip(&self.target).zip(self.weights).enumerate() {
            let s = w / poly::eval(a_prev, x).norm();
            let mut xk = Complex64::new(1.0, 0.0);
            for k in 0..=n {
                if k > 0 {
                    let v = -h * xk * s;
                    m[(i, n + k)] = v.re;
                    m[(f + i, n + k)] = v.im;
                }
                let v = xk * s;
                m[(i, k)] = v.re;
                m[(f + i, k)] = v.im;
                xk *= x;
            }
            rhs[i] = (h * s).re;
            rhs[f + i] = (h * s).im;
        }
        let sol = solve_least_squares(m, rhs)?;
        let b = sol.rows(0, n + 1).iter().copied().collect();
        let mut a = vec![1.0];
        a.extend(sol.rows(n + 1, n).iter().copied());
        Ok((b, a))
    }

    /// Numerator only, denominator fixed.
    fn refit_numerator(&self, a: &[f64]) -> Result<Vec<f64>> {
        let n = self.order;
        let f = self.zinv.len();
        let mut m = DMatrix::<f64>::zeros(2 * f, n + 1);
        let mut rhs = DVector::<f64>::zeros(2 * f);
        for (i, ((&x, &h), &w)) in self.zinv.iter().zip(&self.target).zip(self.weights).enumerate() {
            let ax = poly::eval(a, x);
            let mut xk = Complex64::new(1.0, 0.0);
            for k in 0..=n {
                let v = xk / ax * w;
                m[(i, k)] = v.re;
                m[(f + i, k)] = v.im;
                xk *= x;
            }
            rhs[i] = (h * w).re;
            rhs[f + i] = (h * w).im;
        }
        Ok(solve_least_squares(m, rhs)?.iter().copied().collect())
    }
}

fn solve_least_squares(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    // column scaling keeps the SVD rank test meaningful
    let scales: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    if scales.iter().any(|&s| s == 0.0 || !s.is_finite()) {
        return Err(Error::SingularFit("regressor column is zero".into()));
    }
    let mut scaled = m;
    for (j, &s) in scales.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = scaled.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOLERANCE * smax) {
        return Err(Error::SingularFit(format!(
            "normal equations are singular (condition {:.1e})",
            smax / smin
        )));
    }
    let x = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::SingularFit(e.to_string()))?;
    Ok(DVector::from_iterator(x.len(), x.iter().zip(&scales).map(|(v, s)| v / s)))
}

fn relative_change(old: &[f64], new: &[f64]) -> f64 {
    let diff: f64 = old.iter().zip(new).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = new.iter().map(|v| v * v).sum::<f64>().sqrt();
    diff / norm.max(f64::MIN_POSITIVE)
}

/// Fits `z^{-delay}·B(z⁻¹)/A(z⁻¹)` with `deg B = deg A = order` to `frf`.
///
/// `weights` defaults to uniform. The returned model is always stable.
pub fn fit_rational(
    frf: &FrequencyResponse,
    order: usize,
    fixed_delay_samples: usize,
    weights: Option<&[f64]>,
) -> Result<RationalFit> {
    let ts = frf.sample_time();
    let uniform;
    let weights = match weights {
        Some(w) if w.len() != frf.len() => {
            return Err(Error::Config(format!(
                "{} weights for {} frequency bins",
                w.len(),
                frf.len()
            )))
        }
        Some(w) => w,
        None => {
            uniform = vec![1.0; frf.len()];
            &uniform
        }
    };
    if frf.len() < 2 * order + 1 {
        return Err(Error::SingularFit(format!(
            "{} bins cannot determine {} parameters",
            frf.len(),
            2 * order + 1
        )));
    }
    let zinv: Vec<Complex64> =
        frf.frequencies_hz().iter().map(|&f| crate::lti::unit_zinv(f, ts)).collect();
    let target = frf
        .values()
        .iter()
        .zip(&zinv)
        .map(|(&h, &x)| h / x.powu(fixed_delay_samples as u32))
        .collect();
    let problem = Problem { zinv, target, weights, order };

    let mut a = vec![1.0];
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..MAX_ITERATIONS {
        iterations += 1;
        let (b_new, a_new) = problem.sk_step(&a)?;
        let res = problem.residual(&b_new, &a_new);
        if !res.is_finite() {
            break;
        }
        if let Some((_, _, best_res)) = &best {
            if res > *best_res {
                // the linearization started to drift; keep the best iterate
                converged = true;
                break;
            }
        }
        let change = match &best {
            Some((b_old, a_old, _)) => {
                let old: Vec<f64> = b_old.iter().chain(a_old).copied().collect();
                let new: Vec<f64> = b_new.iter().chain(&a_new).copied().collect();
                relative_change(&old, &new)
            }
            None => f64::INFINITY,
        };
        history.push(res);
        a = a_new.clone();
        best = Some((b_new, a_new, res));
        if change < PARAMETER_TOLERANCE || res == 0.0 {
            converged = true;
            break;
        }
    }
    let (mut b, mut a, _) =
        best.ok_or_else(|| Error::Numeric("no finite fit iterate".into()))?;
    if !converged {
        log::warn!("rational fit did not converge in {MAX_ITERATIONS} iterations; using best iterate");
    }

    let mut poles_reflected = false;
    let mut reflected_residual = None;
    if order > 0 {
        let poles = poly::roots_in_z(&a);
        if poles.iter().any(|p| p.norm() >= 1.0) {
            let mirrored: Vec<Complex64> = poles
                .iter()
                .map(|&p| if p.norm() >= 1.0 { 1.0 / p.conj() } else { p })
                .collect();
            a = poly::from_roots(&mirrored);
            b = problem.refit_numerator(&a)?;
            poles_reflected = true;
            log::warn!("fit had unstable poles; reflected into the unit disc and refit the numerator");
            reflected_residual = Some(problem.residual(&b, &a));
        }
    }

    let tf = DiscreteTransferFunction::new(b, a, fixed_delay_samples, ts)?;
    Ok(RationalFit {
        tf,
        report: FitReport {
            residual_history: history,
            iterations,
            converged,
            poles_reflected,
            reflected_residual,
        },
    })
}
