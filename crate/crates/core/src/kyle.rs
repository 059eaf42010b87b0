//! The multivariate Kyle cross-impact operator and its structural probes.
//!
//! Given a return covariance Sigma and an order-flow covariance Omega, the
//! impact matrix is
//!
//! ```text
//! Lambda = sqrt(Y) * Omega^{-1/2} sqrt(Omega^{1/2} Sigma Omega^{1/2}) Omega^{-1/2}
//! ```
//!
//! with symmetric roots throughout. The module also computes the aggregated
//! flow covariance that folds derivative flows into underlying liquidity
//! pools, assembles the full-universe impact matrix from its rank-N
//! generator, and exposes probes for fragmentation invariance and
//! cross-stability.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, complement_projector, projector, SpectralDecomp, SymMatrix, DEFAULT_EIGEN_FLOOR,
    PSD_TOL,
};

/// Relative cutoff below which eigenvalues of the inner product
/// Omega^{1/2} Sigma Omega^{1/2} are treated as pure roundoff and zeroed.
/// Keeps the floored inverse from amplifying noise in directions where Sigma
/// genuinely vanishes; content produced by the default eigenvalue floor
/// (1e-12) sits above this cutoff and is preserved.
const INNER_NOISE_CUT: f64 = 1e-13;

/// Parameters of the Kyle operator: the traded fraction of covariance Y and
/// the relative eigenvalue floor applied to Omega before inversion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KyleParams {
    pub y: f64,
    pub eigen_floor: f64,
}

impl KyleParams {
    pub fn new(y: f64, eigen_floor: f64) -> Result<Self> {
        if !(y > 0.0 && y <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "y",
                reason: format!("must lie in (0, 1], got {y}"),
            });
        }
        if eigen_floor <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "eigen_floor",
                reason: format!("must be positive, got {eigen_floor}"),
            });
        }
        Ok(Self { y, eigen_floor })
    }

    pub fn with_y(y: f64) -> Result<Self> {
        Self::new(y, DEFAULT_EIGEN_FLOOR)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.y, self.eigen_floor).map(|_| ())
    }
}

impl Default for KyleParams {
    /// Y = 1 matches the model-comparison conventions; simulations override.
    fn default() -> Self {
        Self {
            y: 1.0,
            eigen_floor: DEFAULT_EIGEN_FLOOR,
        }
    }
}

/// Order-flow covariance of the (underlying, derivative) system in block
/// form, as a rate per unit time.
#[derive(Debug, Clone)]
pub struct FlowCov {
    omega_qq: SymMatrix,
    omega_qq_deriv: DMatrix<f64>,
    omega_deriv: SymMatrix,
    bin_width: Option<f64>,
}

impl FlowCov {
    /// Builds the block covariance and validates that the assembled
    /// (N+M)-dimensional matrix is symmetric PSD.
    pub fn new(
        omega_qq: SymMatrix,
        omega_qq_deriv: DMatrix<f64>,
        omega_deriv: SymMatrix,
        bin_width: Option<f64>,
    ) -> Result<Self> {
        let n = omega_qq.dim();
        let m = omega_deriv.dim();
        if omega_qq_deriv.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "FlowCov underlying-derivative block rows",
                expected: n,
                got: omega_qq_deriv.nrows(),
            });
        }
        if omega_qq_deriv.ncols() != m {
            return Err(Error::DimensionMismatch {
                context: "FlowCov underlying-derivative block cols",
                expected: m,
                got: omega_qq_deriv.ncols(),
            });
        }
        let cov = Self {
            omega_qq,
            omega_qq_deriv,
            omega_deriv,
            bin_width,
        };
        cov.assembled().check_psd(PSD_TOL)?;
        Ok(cov)
    }

    /// Splits a full (N+M) flow covariance into blocks at `n_underlyings`.
    pub fn from_full(full: SymMatrix, n_underlyings: usize, bin_width: Option<f64>) -> Result<Self> {
        let total = full.dim();
        if n_underlyings > total {
            return Err(Error::DimensionMismatch {
                context: "FlowCov::from_full underlying count",
                expected: total,
                got: n_underlyings,
            });
        }
        let m = total - n_underlyings;
        let fm = full.as_matrix();
        let qq = SymMatrix::symmetrize(fm.view((0, 0), (n_underlyings, n_underlyings)).into());
        let qq_deriv = fm.view((0, n_underlyings), (n_underlyings, m)).into();
        let deriv =
            SymMatrix::symmetrize(fm.view((n_underlyings, n_underlyings), (m, m)).into());
        Self::new(qq, qq_deriv, deriv, bin_width)
    }

    pub fn n_underlyings(&self) -> usize {
        self.omega_qq.dim()
    }

    pub fn n_derivatives(&self) -> usize {
        self.omega_deriv.dim()
    }

    pub fn underlying_block(&self) -> &SymMatrix {
        &self.omega_qq
    }

    pub fn cross_block(&self) -> &DMatrix<f64> {
        &self.omega_qq_deriv
    }

    pub fn derivative_block(&self) -> &SymMatrix {
        &self.omega_deriv
    }

    pub fn bin_width(&self) -> Option<f64> {
        self.bin_width
    }

    /// The full (N+M) x (N+M) covariance.
    pub fn assembled(&self) -> SymMatrix {
        let n = self.n_underlyings();
        let m = self.n_derivatives();
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n))
            .copy_from(self.omega_qq.as_matrix());
        full.view_mut((0, n), (n, m)).copy_from(&self.omega_qq_deriv);
        full.view_mut((n, 0), (m, n))
            .copy_from(&self.omega_qq_deriv.transpose());
        full.view_mut((n, n), (m, m))
            .copy_from(self.omega_deriv.as_matrix());
        SymMatrix::symmetrize(full)
    }
}

/// Return covariance of the underlyings, optionally carrying the derivative
/// blocks implied by a sensitivity matrix.
#[derive(Debug, Clone)]
pub struct RetCov {
    sigma_pp: SymMatrix,
    derivative_blocks: Option<(DMatrix<f64>, SymMatrix)>,
    bin_width: Option<f64>,
}

impl RetCov {
    pub fn new(sigma_pp: SymMatrix, bin_width: Option<f64>) -> Result<Self> {
        sigma_pp.check_psd(PSD_TOL)?;
        Ok(Self {
            sigma_pp,
            derivative_blocks: None,
            bin_width,
        })
    }

    /// Attaches the derivative blocks implied by `xi`, checking the
    /// consistency Sigma_PP = Xi Sigma_pp Xi^T.
    pub fn with_derivative_blocks(
        mut self,
        sigma_pp_deriv: DMatrix<f64>,
        sigma_deriv: SymMatrix,
        xi: &DMatrix<f64>,
        tol: f64,
    ) -> Result<Self> {
        let implied = xi * self.sigma_pp.as_matrix() * xi.transpose();
        if linalg::rel_frobenius(sigma_deriv.as_matrix(), &implied)
            > tol.max(f64::EPSILON)
        {
            return Err(Error::InvalidParameter {
                name: "sigma_deriv",
                reason: "derivative block inconsistent with Xi Sigma_pp Xi^T".into(),
            });
        }
        self.derivative_blocks = Some((sigma_pp_deriv, sigma_deriv));
        Ok(self)
    }

    pub fn sigma_pp(&self) -> &SymMatrix {
        &self.sigma_pp
    }

    pub fn bin_width(&self) -> Option<f64> {
        self.bin_width
    }

    /// Full (N+M) return covariance [[S, S Xi^T], [Xi S, Xi S Xi^T]].
    pub fn full_with_xi(&self, xi: &DMatrix<f64>) -> SymMatrix {
        let n = self.sigma_pp.dim();
        let m = xi.nrows();
        let s = self.sigma_pp.as_matrix();
        let sxt = s * xi.transpose();
        let xs = xi * s;
        let xsxt = xi * s * xi.transpose();
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(s);
        full.view_mut((0, n), (n, m)).copy_from(&sxt);
        full.view_mut((n, 0), (m, n)).copy_from(&xs);
        full.view_mut((n, n), (m, m)).copy_from(&xsxt);
        SymMatrix::symmetrize(full)
    }
}

/// Full cross-impact matrix together with its rank-N generator and the
/// sensitivity matrix used for the assembly.
#[derive(Debug, Clone)]
pub struct ImpactMatrix {
    full: SymMatrix,
    generator: SymMatrix,
    xi: DMatrix<f64>,
}

impl ImpactMatrix {
    /// Expands a generator acting on the underlyings to the full system:
    /// [[G, G Xi^T], [Xi G, Xi G Xi^T]].
    pub fn from_generator(generator: SymMatrix, xi: DMatrix<f64>) -> Result<Self> {
        let n = generator.dim();
        if xi.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "ImpactMatrix sensitivity columns",
                expected: n,
                got: xi.ncols(),
            });
        }
        let m = xi.nrows();
        let g = generator.as_matrix();
        let gxt = g * xi.transpose();
        let xg = &xi * g;
        let xgxt = &xi * g * xi.transpose();
        let mut full = DMatrix::zeros(n + m, n + m);
        full.view_mut((0, 0), (n, n)).copy_from(g);
        full.view_mut((0, n), (n, m)).copy_from(&gxt);
        full.view_mut((n, 0), (m, n)).copy_from(&xg);
        full.view_mut((n, n), (m, m)).copy_from(&xgxt);
        Ok(Self {
            full: SymMatrix::symmetrize(full),
            generator,
            xi,
        })
    }

    pub fn full(&self) -> &SymMatrix {
        &self.full
    }

    pub fn generator(&self) -> &SymMatrix {
        &self.generator
    }

    pub fn xi(&self) -> &DMatrix<f64> {
        &self.xi
    }

    pub fn n_underlyings(&self) -> usize {
        self.generator.dim()
    }

    pub fn dim(&self) -> usize {
        self.full.dim()
    }

    /// Numerical rank of the full matrix at a relative threshold of 1e-10.
    pub fn rank(&self) -> usize {
        linalg::numerical_rank(&self.full, 1e-10)
    }

    /// Checks symmetry/PSD of the full matrix, the block identity against
    /// the generator, and the rank bound.
    pub fn validate(&self) -> Result<()> {
        self.full.check_psd(PSD_TOL)?;
        let rebuilt = Self::from_generator(self.generator.clone(), self.xi.clone())?;
        let rel = linalg::rel_frobenius(rebuilt.full.as_matrix(), self.full.as_matrix());
        if rel > 1e-10 {
            return Err(Error::InvalidParameter {
                name: "impact_matrix",
                reason: format!("block structure violated: relative error {rel:.3e}"),
            });
        }
        if self.rank() > self.n_underlyings() {
            return Err(Error::InvalidParameter {
                name: "impact_matrix",
                reason: format!(
                    "rank {} exceeds underlying count {}",
                    self.rank(),
                    self.n_underlyings()
                ),
            });
        }
        Ok(())
    }
}

/// The Kyle cross-impact operator sqrt(Y) * Lambda_kyle(Sigma, Omega).
///
/// Omega eigenvalues are floored at `eigen_floor * lambda_max` before
/// inversion so illiquid directions stay finite; the output satisfies
/// Y Sigma = Lambda Omega' Lambda^T against the floored Omega'.
pub fn kyle_lambda(sigma: &SymMatrix, omega: &SymMatrix, params: &KyleParams) -> Result<SymMatrix> {
    params.validate()?;
    if sigma.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "kyle_lambda covariances",
            expected: sigma.dim(),
            got: omega.dim(),
        });
    }
    sigma.check_psd(PSD_TOL)?;
    let omega_decomp = omega.check_psd(PSD_TOL)?;
    let lambda_max = omega_decomp.max_eigenvalue();
    if lambda_max <= 0.0 {
        return Err(Error::ZeroMatrix);
    }
    let floor = params.eigen_floor * lambda_max;
    let half = omega_decomp.map_eigenvalues(|l| l.max(floor).sqrt());

    let inner = SymMatrix::symmetrize(half.as_matrix() * sigma.as_matrix() * half.as_matrix());
    let inner_decomp = SpectralDecomp::new(&inner);
    let scale = inner_decomp.max_eigenvalue().abs();
    let cut = INNER_NOISE_CUT * scale;

    // Assemble Lambda = B sqrt(inner) B one eigenmode at a time as
    // sum_k sqrt(mu_k) (B w_k)(B w_k)^T. Sandwiching dense matrices instead
    // would cancel O(1/floor)-sized intermediates and lose the vanishing
    // blocks that fragmentation invariance relies on.
    let n = sigma.dim();
    let q = omega_decomp.eigenvectors();
    let inv_sqrt_eigs = DVector::from_iterator(
        n,
        omega_decomp
            .eigenvalues()
            .iter()
            .map(|&l| 1.0 / l.max(floor).sqrt()),
    );
    let mut lambda = DMatrix::zeros(n, n);
    for (k, &mu) in inner_decomp.eigenvalues().iter().enumerate() {
        if mu <= cut {
            continue;
        }
        let w = inner_decomp.eigenvectors().column(k);
        let coeffs = q.transpose() * w;
        let z = q * coeffs.component_mul(&inv_sqrt_eigs);
        lambda += &z * z.transpose() * mu.sqrt();
    }
    Ok(SymMatrix::symmetrize(lambda * params.y.sqrt()))
}

/// Same operator via a Cholesky factor of Omega instead of the symmetric
/// root. By the orthogonal freedom of factor halves the result must agree
/// with [`kyle_lambda`]; kept as a cross-check. Requires Omega PD.
pub fn kyle_lambda_cholesky(
    sigma: &SymMatrix,
    omega: &SymMatrix,
    params: &KyleParams,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    if sigma.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "kyle_lambda_cholesky covariances",
            expected: sigma.dim(),
            got: omega.dim(),
        });
    }
    let l = linalg::cholesky_factor(omega)?;
    let l_inv = l.clone().try_inverse().ok_or(Error::ZeroMatrix)?;
    let inner = SymMatrix::symmetrize(l.transpose() * sigma.as_matrix() * &l);
    let root = linalg::spd_sqrt(&inner, 0.0)?;
    let lambda = l_inv.transpose() * root.as_matrix() * &l_inv;
    Ok(lambda * params.y.sqrt())
}

/// Aggregated order-flow covariance
/// Omega_qq + Xi^T Omega_QQ Xi + Xi^T Omega_Qq + Omega_qQ Xi:
/// the covariance of the pooled flow dq + Xi^T dQ.
pub fn aggregate_flow_cov(omega: &FlowCov, xi: &DMatrix<f64>) -> Result<SymMatrix> {
    let n = omega.n_underlyings();
    let m = omega.n_derivatives();
    if xi.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "aggregate_flow_cov sensitivity rows",
            expected: m,
            got: xi.nrows(),
        });
    }
    if xi.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "aggregate_flow_cov sensitivity cols",
            expected: n,
            got: xi.ncols(),
        });
    }
    let cross = omega.cross_block() * xi;
    let agg = omega.underlying_block().as_matrix()
        + xi.transpose() * omega.derivative_block().as_matrix() * xi
        + cross.transpose()
        + cross;
    Ok(SymMatrix::symmetrize(agg))
}

/// Builds the full-universe impact matrix: the generator is the Kyle
/// operator on (Sigma_pp, Omega_Xi) and the derivative blocks follow from
/// the sensitivity matrix.
pub fn assemble_full(
    sigma_pp: &RetCov,
    omega: &FlowCov,
    xi: &DMatrix<f64>,
    params: &KyleParams,
) -> Result<ImpactMatrix> {
    let omega_xi = aggregate_flow_cov(omega, xi)?;
    let generator = kyle_lambda(sigma_pp.sigma_pp(), &omega_xi, params)?;
    ImpactMatrix::from_generator(generator, xi.clone())
}

/// Relative residual of the covariance-consistency identity
/// Y Sigma = Lambda Omega Lambda^T.
pub fn covariance_consistency_residual(
    lambda: &SymMatrix,
    sigma: &SymMatrix,
    omega: &SymMatrix,
    y: f64,
) -> Result<f64> {
    if lambda.dim() != sigma.dim() || lambda.dim() != omega.dim() {
        return Err(Error::DimensionMismatch {
            context: "covariance_consistency_residual",
            expected: lambda.dim(),
            got: sigma.dim().max(omega.dim()),
        });
    }
    let lhs = lambda.as_matrix() * omega.as_matrix() * lambda.as_matrix();
    let target = sigma.as_matrix() * y;
    let denom = target.norm().max(f64::MIN_POSITIVE);
    Ok((lhs - target).norm() / denom)
}

/// Relative tolerance for accepting that a basis vector lies in ker(Sigma).
const KERNEL_TOL: f64 = 1e-8;

/// Result of the fragmentation-invariance probe. All residuals are absolute
/// Frobenius norms; `lambda_norm` is the reference scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FragmentationReport {
    /// |Pi_V Lambda|_F: impact received by the zero-volatility subspace.
    pub projected_impact: f64,
    /// |Lambda Pi_V|_F: impact exerted by flow on the subspace.
    pub impact_from_subspace: f64,
    /// |Lambda_kyle(Sigma, masked Omega) - Lambda_kyle(Sigma, Omega)|_F.
    pub masked_omega_difference: f64,
    pub lambda_norm: f64,
    /// Relative threshold the probe was evaluated against.
    pub rel_tol: f64,
    pub passed: bool,
}

impl FragmentationReport {
    pub fn max_relative_residual(&self) -> f64 {
        let scale = self.lambda_norm.max(f64::MIN_POSITIVE);
        self.projected_impact
            .max(self.impact_from_subspace)
            .max(self.masked_omega_difference)
            / scale
    }
}

/// Probes strong fragmentation invariance: for V inside ker(Sigma), the
/// impact matrix must vanish on V from both sides and be insensitive to the
/// flow covariance restricted to V.
pub fn check_fragmentation(
    sigma: &SymMatrix,
    omega: &SymMatrix,
    v_basis: &[DVector<f64>],
    params: &KyleParams,
) -> Result<FragmentationReport> {
    let n = sigma.dim();
    let sigma_scale = sigma.spectral_norm();
    for (index, v) in v_basis.iter().enumerate() {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "fragmentation kernel basis",
                expected: n,
                got: v.len(),
            });
        }
        let residual = (sigma.as_matrix() * v).norm();
        let tol = KERNEL_TOL * sigma_scale.max(f64::MIN_POSITIVE) * v.norm();
        if residual > tol {
            return Err(Error::NotInKernel {
                index,
                residual,
                tol,
            });
        }
    }

    let lambda = kyle_lambda(sigma, omega, params)?;
    let pi_v = projector(v_basis, n)?;
    let pi_bar = complement_projector(&pi_v);
    let masked =
        SymMatrix::symmetrize(pi_bar.as_matrix() * omega.as_matrix() * pi_bar.as_matrix());
    let lambda_masked = kyle_lambda(sigma, &masked, params)?;

    let rel_tol = 1e-7;
    let projected_impact = (pi_v.as_matrix() * lambda.as_matrix()).norm();
    let impact_from_subspace = (lambda.as_matrix() * pi_v.as_matrix()).norm();
    let masked_omega_difference =
        (lambda_masked.as_matrix() - lambda.as_matrix()).norm();
    let lambda_norm = lambda.norm();
    let passed = projected_impact <= rel_tol * lambda_norm
        && impact_from_subspace <= rel_tol * lambda_norm
        && masked_omega_difference <= rel_tol * lambda_norm;
    Ok(FragmentationReport {
        projected_impact,
        impact_from_subspace,
        masked_omega_difference,
        lambda_norm,
        rel_tol,
        passed,
    })
}

/// One evaluation point of the cross-stability probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossStabilityPoint {
    pub eps: f64,
    /// |PiBar_W Lambda(Sigma, Omega_eps) Pi_W|_F.
    pub off_block_norm: f64,
    /// |PiBar_W Lambda(Sigma, Omega_eps) PiBar_W - limit|_F.
    pub convergence_error: f64,
    /// |Lambda(Sigma, Omega_eps)|_F; the illiquid diagonal grows like
    /// 1/eps, so residuals should be read against this scale.
    pub lambda_norm: f64,
}

/// Result of the cross-stability probe along a decreasing epsilon schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossStabilityReport {
    pub points: Vec<CrossStabilityPoint>,
    /// Frobenius norm of the reduced-model limit block.
    pub limit_norm: f64,
    /// Off-block norms never exceed `bounded_factor` times their value at
    /// the largest epsilon.
    pub off_block_bounded: bool,
    pub bounded_factor: f64,
    /// Convergence errors are non-increasing along the schedule.
    pub monotone_convergence: bool,
}

/// Probes cross-stability: scaling the liquidity of the subspace W by eps,
/// the liquid-liquid block must converge to the reduced model computed on
/// the complement, and the liquid-illiquid block must stay bounded.
pub fn check_cross_stability(
    sigma: &SymMatrix,
    omega: &SymMatrix,
    w_basis: &[DVector<f64>],
    eps_list: &[f64],
    params: &KyleParams,
) -> Result<CrossStabilityReport> {
    let n = sigma.dim();
    let decomp = omega.check_psd(PSD_TOL)?;
    if decomp.min_eigenvalue() <= 0.0 {
        return Err(Error::IndefiniteInput {
            min_eig: decomp.min_eigenvalue(),
            tol: 0.0,
        });
    }
    if eps_list.is_empty() {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "must be nonempty".into(),
        });
    }
    for w in eps_list.windows(2) {
        if !(w[1] > 0.0 && w[1] <= w[0]) {
            return Err(Error::InvalidParameter {
                name: "eps_list",
                reason: "must be positive and decreasing".into(),
            });
        }
    }
    if eps_list[0] <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "eps_list",
            reason: "must be positive".into(),
        });
    }

    let pi_w = projector(w_basis, n)?;
    let pi_bar = complement_projector(&pi_w);

    let sigma_reduced =
        SymMatrix::symmetrize(pi_bar.as_matrix() * sigma.as_matrix() * pi_bar.as_matrix());
    let omega_reduced =
        SymMatrix::symmetrize(pi_bar.as_matrix() * omega.as_matrix() * pi_bar.as_matrix());
    let lambda_reduced = kyle_lambda(&sigma_reduced, &omega_reduced, params)?;
    let limit =
        pi_bar.as_matrix() * lambda_reduced.as_matrix() * pi_bar.as_matrix();

    let mut points = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mixer = pi_bar.as_matrix() + pi_w.as_matrix() * eps;
        let omega_eps = SymMatrix::symmetrize(&mixer * omega.as_matrix() * &mixer);
        let lambda_eps = kyle_lambda(sigma, &omega_eps, params)?;
        let off_block_norm =
            (pi_bar.as_matrix() * lambda_eps.as_matrix() * pi_w.as_matrix()).norm();
        let liquid_block = pi_bar.as_matrix() * lambda_eps.as_matrix() * pi_bar.as_matrix();
        let convergence_error = (liquid_block - &limit).norm();
        points.push(CrossStabilityPoint {
            eps,
            off_block_norm,
            convergence_error,
            lambda_norm: lambda_eps.norm(),
        });
    }

    let bounded_factor = 2.0;
    let first_off = points[0].off_block_norm;
    let max_off = points
        .iter()
        .fold(0.0f64, |m, p| m.max(p.off_block_norm));
    // A roundoff slack keeps decoupled systems, whose off block is exactly
    // zero apart from noise under the diverging illiquid diagonal, from
    // tripping the boundedness flag.
    let max_lambda = points.iter().fold(0.0f64, |m, p| m.max(p.lambda_norm));
    let off_slack = 1e-12 * max_lambda.max(1.0);
    let off_block_bounded = max_off <= bounded_factor * first_off + off_slack;

    let conv_slack = 1e-12 * limit.norm().max(1.0);
    let monotone_convergence = points
        .windows(2)
        .all(|w| w[1].convergence_error <= w[0].convergence_error + conv_slack);

    Ok(CrossStabilityReport {
        points,
        limit_norm: limit.norm(),
        off_block_bounded,
        bounded_factor,
        monotone_convergence,
    })
}
