//! Orthogonal alternating subspace approximation (OASA) with an error
//! correction loop (ECL).
//!
//! Each iteration alternates a left step `P <- orth((M + E) Q)` and a right
//! step `Q <- orth((M + E)^T P)`. The returned factors are the coefficient
//! matrix `P = (M + E) Q` and the orthonormal `Q`, so `P Q^T` is the best
//! approximation of `M + E` inside `span(Q)`. The residual feedback `E`
//! lives in an [`ErrorState`] owned by the caller, one per tensor stream.

use crate::error::{Error, Result};
use crate::tensor::{gaussian, orthonormalize, Mat, RngSeed};

/// Which residual is folded into the feedback term after a compression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualTarget {
    /// `E <- beta E + (M - M_hat)`: the residual against the uncompensated input.
    #[default]
    Original,
    /// `E <- beta E + ((M + E) - M_hat)`: the residual against the compensated
    /// input. With `beta = 0` this is classic error feedback.
    Compensated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OasaConfig {
    pub max_iters: usize,
    pub beta: f64,
    pub min_iters: usize,
    pub patience: usize,
    /// Smallest relative improvement of the best residual that resets the
    /// stagnation counter.
    pub stall_tol: f64,
    pub seed: RngSeed,
    pub residual_target: ResidualTarget,
}

impl Default for OasaConfig {
    fn default() -> Self {
        OasaConfig {
            max_iters: 10,
            beta: 0.9,
            min_iters: 2,
            patience: 2,
            stall_tol: 1e-3,
            seed: RngSeed(0x0a5a),
            residual_target: ResidualTarget::Original,
        }
    }
}

impl OasaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.min_iters > self.max_iters {
            return Err(Error::InvalidConfig(format!(
                "min_iters {} exceeds max_iters {}",
                self.min_iters, self.max_iters
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::InvalidConfig(format!("beta {} outside [0, 1]", self.beta)));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if self.stall_tol.is_nan() || self.stall_tol <= 0.0 {
            return Err(Error::InvalidConfig("stall_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Residual feedback memory for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorState {
    e: Mat,
}

impl ErrorState {
    pub fn new(rows: usize, cols: usize) -> ErrorState {
        ErrorState {
            e: Mat::zeros(rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.e.shape()
    }

    pub fn residual(&self) -> &Mat {
        &self.e
    }

    pub fn reset(&mut self) {
        self.e.fill_zero();
    }

    fn check(&self, m: &Mat) -> Result<()> {
        if self.e.shape() != m.shape() {
            let (er, ec) = self.e.shape();
            return Err(Error::ShapeTag {
                expected_rows: er,
                expected_cols: ec,
                rows: m.rows(),
                cols: m.cols(),
            });
        }
        Ok(())
    }
}

/// Zeroes the feedback term.
pub fn reset_error(state: &mut ErrorState) {
    state.reset();
}

/// `M_hat = p q^T` with `q` column-orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactors {
    pub p: Mat,
    pub q: Mat,
}

impl LowRankFactors {
    pub fn new(p: Mat, q: Mat) -> Result<LowRankFactors> {
        if p.cols() != q.cols() || p.cols() == 0 {
            return Err(Error::DimensionMismatch {
                op: "factors",
                left_rows: p.rows(),
                left_cols: p.cols(),
                right_rows: q.rows(),
                right_cols: q.cols(),
            });
        }
        Ok(LowRankFactors { p, q })
    }

    pub fn rank(&self) -> usize {
        self.p.cols()
    }

    /// Shape of the reconstructed matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.p.rows(), self.q.rows())
    }
}

pub fn decompress(f: &LowRankFactors) -> Mat {
    f.p.matmul_t(&f.q).expect("factor ranks agree by construction")
}

#[derive(Debug, Clone)]
pub struct Compression {
    pub factors: LowRankFactors,
    pub iters_used: usize,
    /// `||M' - P Q^T||_F / ||M'||_F` of the returned factors, `M' = M (+ E)`.
    pub final_residual: f64,
    /// `||M'||_F`.
    pub target_norm: f64,
    /// Relative residual after every iteration.
    pub history: Vec<f64>,
}

/// Compresses `m` to rank `r`.
///
/// With `ecl` set, `M' = m + E` is compressed and the feedback term updated
/// afterwards; otherwise `m` is compressed and `state` is left alone.
/// `warm_q` (an `n x r` orthonormal basis, typically the previous call's `Q`
/// on the same stream) replaces the random start.
///
/// Iteration stops early once the best relative residual has failed to
/// improve by `stall_tol` (relatively) more than `patience` times and at
/// least `min_iters` iterations ran. The factors of the best iterate are
/// returned.
pub fn compress(
    m: &Mat,
    r: usize,
    cfg: &OasaConfig,
    state: &mut ErrorState,
    ecl: bool,
    warm_q: Option<&Mat>,
) -> Result<Compression> {
    cfg.validate()?;
    let (rows, cols) = m.shape();
    let max_rank = rows.min(cols);
    if r == 0 || r > max_rank {
        return Err(Error::RankOutOfRange { rank: r, max: max_rank });
    }
    m.check_finite()?;
    state.check(m)?;

    let target = if ecl { m.try_add(&state.e)? } else { m.clone() };
    let target_norm = target.fro_norm();

    let mut q = match warm_q {
        Some(w) => {
            if w.shape() != (cols, r) {
                return Err(Error::DimensionMismatch {
                    op: "warm start",
                    left_rows: cols,
                    left_cols: r,
                    right_rows: w.rows(),
                    right_cols: w.cols(),
                });
            }
            w.clone()
        }
        None => orthonormalize(&gaussian(cols, r, cfg.seed))?,
    };

    if target_norm == 0.0 {
        let factors = LowRankFactors::new(Mat::zeros(rows, r), q)?;
        if ecl {
            update_feedback(state, m, &target, &Mat::zeros(rows, cols), cfg);
        }
        return Ok(Compression {
            factors,
            iters_used: 0,
            final_residual: 0.0,
            target_norm,
            history: Vec::new(),
        });
    }

    let mut best: Option<(Mat, Mat, f64)> = None;
    let mut stalls = 0usize;
    let mut history = Vec::with_capacity(cfg.max_iters);
    let mut iters_used = 0;
    for t in 1..=cfg.max_iters {
        iters_used = t;
        let p_basis = orthonormalize(&target.matmul(&q)?)?;
        q = orthonormalize(&target.t_matmul(&p_basis)?)?;
        let coef = target.matmul(&q)?;
        let resid = (&target - &coef.matmul_t(&q)?).fro_norm() / target_norm;
        history.push(resid);

        match &mut best {
            Some((bp, bq, bres)) => {
                if *bres - resid < cfg.stall_tol * *bres {
                    stalls += 1;
                } else {
                    stalls = 0;
                }
                if resid < *bres {
                    *bp = coef;
                    *bq = q.clone();
                    *bres = resid;
                }
            }
            None => best = Some((coef, q.clone(), resid)),
        }
        if stalls > cfg.patience && t >= cfg.min_iters {
            break;
        }
    }

    let (p, q, final_residual) = best.expect("at least one iteration");
    let factors = LowRankFactors::new(p, q)?;
    if ecl {
        let approx = decompress(&factors);
        update_feedback(state, m, &target, &approx, cfg);
    }
    Ok(Compression {
        factors,
        iters_used,
        final_residual,
        target_norm,
        history,
    })
}

fn update_feedback(state: &mut ErrorState, m: &Mat, target: &Mat, approx: &Mat, cfg: &OasaConfig) {
    let reference = match cfg.residual_target {
        ResidualTarget::Original => m,
        ResidualTarget::Compensated => target,
    };
    let mut next = reference - approx;
    next.axpy(cfg.beta, &state.e).expect("state shape checked");
    state.e = next;
}
