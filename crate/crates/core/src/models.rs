//! Comparison cross-impact models over a common universe.
//!
//! Every builder returns a full-universe [`ImpactMatrix`]: a generator on
//! the underlying coordinates expanded through the sensitivity matrix. The
//! direct models scale coordinate directions independently; the Kyle
//! variants keep the cross terms induced by return correlations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kyle::{
    aggregate_flow_cov, assemble_full, kyle_lambda, FlowCov, ImpactMatrix, KyleParams, RetCov,
};
use crate::linalg::SymMatrix;

/// Model selector. String forms match the CLI/config names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Bs,
    Direct2d,
    Direct4d,
    Kyle2d,
    Kyle4d,
    KyleFull,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Bs,
        ModelKind::Direct2d,
        ModelKind::Direct4d,
        ModelKind::Kyle2d,
        ModelKind::Kyle4d,
        ModelKind::KyleFull,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bs => "bs",
            ModelKind::Direct2d => "direct-2d",
            ModelKind::Direct4d => "direct-4d",
            ModelKind::Kyle2d => "kyle-2d",
            ModelKind::Kyle4d => "kyle-4d",
            ModelKind::KyleFull => "kyle-full",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "model",
                reason: format!(
                    "unknown model {s:?}; expected one of bs, direct-2d, direct-4d, kyle-2d, kyle-4d, kyle-full"
                ),
            })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Scalar observables of the spot/level pair: volatilities, their
/// correlation and the aggregated liquidities of the delta and vega pools.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScalarObservables {
    pub sigma: f64,
    pub xi: f64,
    pub rho: f64,
    pub omega_delta: f64,
    pub omega_vega: f64,
}

impl ScalarObservables {
    pub fn new(sigma: f64, xi: f64, rho: f64, omega_delta: f64, omega_vega: f64) -> Result<Self> {
        if sigma <= 0.0 || xi <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma/xi",
                reason: "volatilities must be positive".into(),
            });
        }
        if omega_delta <= 0.0 || omega_vega <= 0.0 {
            return Err(Error::NonPositiveLiquidity(format!(
                "omega_delta = {omega_delta}, omega_vega = {omega_vega}"
            )));
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("correlation must lie in [-1, 1], got {rho}"),
            });
        }
        Ok(Self {
            sigma,
            xi,
            rho,
            omega_delta,
            omega_vega,
        })
    }

    /// Extracts the scalars from an underlying return covariance and the
    /// aggregated flow covariance, both indexed (spot, level, ...).
    pub fn from_covariances(sigma_pp: &SymMatrix, omega_xi: &SymMatrix) -> Result<Self> {
        if sigma_pp.dim() < 2 {
            return Err(Error::MissingCoordinate("level".into()));
        }
        if omega_xi.dim() != sigma_pp.dim() {
            return Err(Error::DimensionMismatch {
                context: "scalar observables",
                expected: sigma_pp.dim(),
                got: omega_xi.dim(),
            });
        }
        let sigma = sigma_pp[(0, 0)].sqrt();
        let xi = sigma_pp[(1, 1)].sqrt();
        if sigma <= 0.0 || xi <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma/xi",
                reason: "spot and level variances must be positive".into(),
            });
        }
        let rho = (sigma_pp[(0, 1)] / (sigma * xi)).clamp(-1.0, 1.0);
        let omega_delta = omega_xi[(0, 0)];
        let omega_vega = omega_xi[(1, 1)];
        if omega_delta <= 0.0 || omega_vega <= 0.0 {
            return Err(Error::NonPositiveLiquidity(format!(
                "aggregated diagonals {omega_delta}, {omega_vega}"
            )));
        }
        Self::new(sigma, xi, rho, omega_delta.sqrt(), omega_vega.sqrt())
    }
}

fn unsupported(kind: ModelKind, reason: &str) -> Error {
    Error::UnsupportedUniverse {
        model: kind.name().into(),
        reason: reason.into(),
    }
}

/// Builds the full impact matrix of the selected comparison model from the
/// underlying return covariance, the raw flow covariance and the
/// sensitivity matrix.
pub fn build_model(
    kind: ModelKind,
    sigma_pp: &RetCov,
    omega: &FlowCov,
    xi_sens: &DMatrix<f64>,
) -> Result<ImpactMatrix> {
    let n = sigma_pp.sigma_pp().dim();
    let params = KyleParams::default();
    match kind {
        ModelKind::Kyle4d => {
            if n != 4 {
                return Err(unsupported(kind, "requires the 4 underlying coordinates"));
            }
            assemble_full(sigma_pp, omega, xi_sens, &params)
        }
        ModelKind::KyleFull => assemble_full(sigma_pp, omega, xi_sens, &params),
        _ => {
            let omega_xi = aggregate_flow_cov(omega, xi_sens)?;
            let generator = direct_family_generator(kind, sigma_pp.sigma_pp(), &omega_xi)?;
            ImpactMatrix::from_generator(generator, xi_sens.clone())
        }
    }
}

/// Generator of the BS/direct/leverage-approximation family in underlying
/// coordinates.
fn direct_family_generator(
    kind: ModelKind,
    sigma_pp: &SymMatrix,
    omega_xi: &SymMatrix,
) -> Result<SymMatrix> {
    let n = sigma_pp.dim();
    let spot_var = sigma_pp[(0, 0)];
    let spot_liq = omega_xi[(0, 0)];
    if spot_liq <= 0.0 {
        return Err(Error::NonPositiveLiquidity(format!(
            "aggregated spot liquidity {spot_liq}"
        )));
    }
    if spot_var <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "sigma_pp",
            reason: "spot variance must be positive".into(),
        });
    }
    let mut g = DMatrix::zeros(n, n);
    g[(0, 0)] = (spot_var / spot_liq).sqrt();
    if kind == ModelKind::Bs {
        return Ok(SymMatrix::symmetrize(g));
    }

    if n < 2 {
        return Err(unsupported(kind, "requires a level factor coordinate"));
    }
    let obs = ScalarObservables::from_covariances(sigma_pp, omega_xi)?;
    match kind {
        ModelKind::Direct2d => {
            g[(1, 1)] = obs.xi / obs.omega_vega;
        }
        ModelKind::Kyle2d => {
            g[(1, 1)] = obs.xi * (1.0 - obs.rho * obs.rho).sqrt() / obs.omega_vega;
            let cross = obs.xi * obs.rho / obs.omega_delta;
            g[(0, 1)] = cross;
            g[(1, 0)] = cross;
        }
        ModelKind::Direct4d => {
            if n != 4 {
                return Err(unsupported(kind, "requires the 4 underlying coordinates"));
            }
            g[(1, 1)] = obs.xi / obs.omega_vega;
            for i in 2..n {
                let liq = omega_xi[(i, i)];
                if liq <= 0.0 {
                    return Err(Error::NonPositiveLiquidity(format!(
                        "aggregated liquidity of coordinate {i} is {liq}"
                    )));
                }
                g[(i, i)] = (sigma_pp[(i, i)] / liq).sqrt();
            }
        }
        _ => unreachable!("handled above"),
    }
    Ok(SymMatrix::symmetrize(g))
}

/// Closed-form single-factor impact block on (spot, level).
///
/// Valid when the delta and vega flow pools are uncorrelated, which the
/// caller is responsible for flagging. Agrees with the general operator on
/// the induced two-dimensional system to machine precision.
pub fn single_factor_exact(obs: &ScalarObservables) -> Result<SymMatrix> {
    ScalarObservables::new(
        obs.sigma,
        obs.xi,
        obs.rho,
        obs.omega_delta,
        obs.omega_vega,
    )?;
    let s = obs.sigma;
    let x = obs.xi;
    let rho = obs.rho;
    let wd = obs.omega_delta;
    let wv = obs.omega_vega;
    let ortho = (1.0 - rho * rho).sqrt();
    let denom_sq = s * s * wd * wd + x * x * wv * wv + 2.0 * s * x * ortho * wd * wv;
    if denom_sq <= 0.0 {
        return Err(Error::NonPositiveLiquidity(format!(
            "single-factor normalization {denom_sq}"
        )));
    }
    let denom = denom_sq.sqrt();
    let mut m = DMatrix::zeros(2, 2);
    m[(0, 0)] = (s * s + (wv / wd) * s * x * ortho) / denom;
    m[(1, 1)] = (x * x + (wd / wv) * s * x * ortho) / denom;
    m[(0, 1)] = s * x * rho / denom;
    m[(1, 0)] = m[(0, 1)];
    Ok(SymMatrix::symmetrize(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruments::{
        sensitivity_matrix, Instrument, MarketState, Universe, VolFactorModel,
    };
    use crate::linalg::{self, SpectralDecomp};
    use nalgebra::DVector;

    fn diag(values: &[f64]) -> SymMatrix {
        SymMatrix::from_diagonal(&DVector::from_column_slice(values))
    }

    /// Spot-only universe: the BS model is the scalar sigma/omega and
    /// coincides with the general operator at Y = 1.
    #[test]
    fn bs_model_spot_only_degenerates_to_scalar() {
        let sigma = RetCov::new(diag(&[0.04]), None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0]), 1, None).unwrap();
        let xi = DMatrix::zeros(0, 1);
        let impact = build_model(ModelKind::Bs, &sigma, &omega, &xi).unwrap();
        let expected = 0.2 / 5.0;
        assert!((impact.generator()[(0, 0)] - expected).abs() <= 1e-14);
        let general = kyle_lambda(
            sigma.sigma_pp(),
            &diag(&[25.0]),
            &KyleParams::default(),
        )
        .unwrap();
        assert!((impact.generator()[(0, 0)] - general[(0, 0)]).abs() <= 1e-12);
    }

    #[test]
    fn kyle2d_with_zero_rho_is_direct2d() {
        let sigma_pp = diag(&[0.04, 0.01]);
        let sigma = RetCov::new(sigma_pp, None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0, 4.0]), 2, None).unwrap();
        let xi = DMatrix::zeros(0, 2);
        let kyle = build_model(ModelKind::Kyle2d, &sigma, &omega, &xi).unwrap();
        let direct = build_model(ModelKind::Direct2d, &sigma, &omega, &xi).unwrap();
        assert!(
            linalg::rel_frobenius(kyle.full().as_matrix(), direct.full().as_matrix())
                <= 1e-14
        );
    }

    /// In the small vega-risk regime the leverage approximation tracks the
    /// exact single-factor block entrywise within 5%.
    #[test]
    fn kyle2d_tracks_exact_single_factor_in_regime() {
        let sigma = 0.2f64;
        let omega_delta = 5.0f64;
        let rho = -0.9f64;
        let omega_vega = 2.0f64;
        // xi such that xi * omega_vega = 0.01 * sigma * omega_delta.
        let xi = 0.01 * sigma * omega_delta / omega_vega;
        let obs = ScalarObservables::new(sigma, xi, rho, omega_delta, omega_vega).unwrap();
        let exact = single_factor_exact(&obs).unwrap();

        let sigma_pp = SymMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                sigma * sigma,
                rho * sigma * xi,
                rho * sigma * xi,
                xi * xi,
            ],
        ))
        .unwrap();
        let ret = RetCov::new(sigma_pp, None).unwrap();
        let flow = FlowCov::from_full(
            diag(&[omega_delta * omega_delta, omega_vega * omega_vega]),
            2,
            None,
        )
        .unwrap();
        let approx = build_model(ModelKind::Kyle2d, &ret, &flow, &DMatrix::zeros(0, 2))
            .unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let e = exact[(i, j)];
                let a = approx.generator()[(i, j)];
                assert!(
                    (a - e).abs() <= 0.05 * e.abs().max(1e-12),
                    "entry ({i},{j}): approx {a} vs exact {e}"
                );
            }
        }
    }

    /// The vega-pool coefficient carries the sqrt(1 - rho^2) suppression; at
    /// rho ~ +/- 0.917 the prefactor is close to 0.4.
    #[test]
    fn kyle2d_vega_prefactor_suppression() {
        let rho: f64 = -(1.0f64 - 0.4f64 * 0.4).sqrt();
        assert!(((1.0 - rho * rho).sqrt() - 0.4).abs() <= 1e-12);
        let sigma_pp = SymMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[0.04, rho * 0.2 * 0.1, rho * 0.2 * 0.1, 0.01],
        ))
        .unwrap();
        let ret = RetCov::new(sigma_pp, None).unwrap();
        let flow = FlowCov::from_full(diag(&[25.0, 4.0]), 2, None).unwrap();
        let impact = build_model(ModelKind::Kyle2d, &ret, &flow, &DMatrix::zeros(0, 2))
            .unwrap();
        // Vega-pool diagonal: xi * sqrt(1 - rho^2) / omega_vega = 0.1*0.4/2.
        assert!((impact.generator()[(1, 1)] - 0.1 * 0.4 / 2.0).abs() <= 1e-12);
    }

    #[test]
    fn single_factor_exact_matches_general_operator() {
        let obs = ScalarObservables::new(0.2, 0.05, -0.7, 5.0, 1.5).unwrap();
        let exact = single_factor_exact(&obs).unwrap();
        let sigma = SymMatrix::new(DMatrix::from_row_slice(
            2,
            2,
            &[
                obs.sigma * obs.sigma,
                obs.rho * obs.sigma * obs.xi,
                obs.rho * obs.sigma * obs.xi,
                obs.xi * obs.xi,
            ],
        ))
        .unwrap();
        let omega = diag(&[
            obs.omega_delta * obs.omega_delta,
            obs.omega_vega * obs.omega_vega,
        ]);
        let general = kyle_lambda(&sigma, &omega, &KyleParams::default()).unwrap();
        assert!(
            linalg::rel_frobenius(exact.as_matrix(), general.as_matrix()) <= 1e-9,
            "closed form deviates from the operator: {:?} vs {:?}",
            exact.as_matrix().as_slice(),
            general.as_matrix().as_slice()
        );
    }

    #[test]
    fn single_factor_exact_zero_rho_block() {
        let obs = ScalarObservables::new(0.2, 0.05, 0.0, 5.0, 1.5).unwrap();
        let exact = single_factor_exact(&obs).unwrap();
        assert_eq!(exact[(0, 1)], 0.0);
        // Diagonal entries match the general operator evaluated directly.
        let sigma = diag(&[0.04, 0.0025]);
        let omega = diag(&[25.0, 2.25]);
        let general = kyle_lambda(&sigma, &omega, &KyleParams::default()).unwrap();
        assert!((exact[(0, 0)] - general[(0, 0)]).abs() <= 1e-12);
        assert!((exact[(1, 1)] - general[(1, 1)]).abs() <= 1e-12);
    }

    #[test]
    fn every_model_output_is_symmetric_psd() {
        // A correlated but comfortably PSD 4-underlying system.
        let sigma_pp = SymMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.04, -0.007, 0.001, 0.0005, //
                -0.007, 0.0025, -0.0002, 0.0001, //
                0.001, -0.0002, 0.0009, 0.0, //
                0.0005, 0.0001, 0.0, 0.0016,
            ],
        ))
        .unwrap();
        let ret = RetCov::new(sigma_pp, None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0, 4.0, 1.0, 2.0]), 4, None).unwrap();
        let xi = DMatrix::zeros(0, 4);
        for kind in ModelKind::ALL {
            let impact = build_model(kind, &ret, &omega, &xi).unwrap();
            let full = impact.full();
            let asym = (full.as_matrix() - full.as_matrix().transpose()).norm();
            assert!(asym <= 1e-12 * full.norm().max(1e-300), "{kind}: asymmetric");
            let min_eig = SpectralDecomp::new(full).min_eigenvalue();
            assert!(
                min_eig >= -1e-10 * full.spectral_norm(),
                "{kind}: min eigenvalue {min_eig}"
            );
        }
    }

    /// Decoupled system: where the models overlap they agree, and nothing
    /// couples spot to the factor directions.
    #[test]
    fn models_coincide_on_decoupled_universe() {
        let ret = RetCov::new(diag(&[0.04, 0.0025, 0.0009, 0.0016]), None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0, 4.0, 1.0, 2.0]), 4, None).unwrap();
        let xi = DMatrix::zeros(0, 4);
        let by_kind: Vec<ImpactMatrix> = ModelKind::ALL
            .iter()
            .map(|&k| build_model(k, &ret, &omega, &xi).unwrap())
            .collect();
        // Identical spot cell everywhere.
        for (k, impact) in ModelKind::ALL.iter().zip(&by_kind) {
            assert!(
                (impact.generator()[(0, 0)] - 0.2 / 5.0).abs() <= 1e-12,
                "{k}: spot cell"
            );
            for j in 1..4 {
                assert!(impact.generator()[(0, j)].abs() <= 1e-12, "{k}: coupling");
            }
        }
        // The three full-rank models agree exactly, as do the 2d pair.
        let d4 = &by_kind[2];
        let k4 = &by_kind[3];
        let kf = &by_kind[5];
        assert!(
            linalg::rel_frobenius(d4.full().as_matrix(), k4.full().as_matrix()) <= 1e-10
        );
        assert!(
            linalg::rel_frobenius(kf.full().as_matrix(), k4.full().as_matrix()) <= 1e-10
        );
        let d2 = &by_kind[1];
        let k2 = &by_kind[4];
        assert!(
            linalg::rel_frobenius(d2.full().as_matrix(), k2.full().as_matrix()) <= 1e-10
        );
    }

    #[test]
    fn direct_models_have_no_spot_factor_coupling() {
        let sigma_pp = SymMatrix::new(DMatrix::from_row_slice(
            4,
            4,
            &[
                0.04, -0.007, 0.001, 0.0005, //
                -0.007, 0.0025, -0.0002, 0.0001, //
                0.001, -0.0002, 0.0009, 0.0, //
                0.0005, 0.0001, 0.0, 0.0016,
            ],
        ))
        .unwrap();
        let ret = RetCov::new(sigma_pp, None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0, 4.0, 1.0, 2.0]), 4, None).unwrap();
        let xi = DMatrix::zeros(0, 4);
        for kind in [ModelKind::Bs, ModelKind::Direct2d, ModelKind::Direct4d] {
            let g = build_model(kind, &ret, &omega, &xi).unwrap();
            for j in 1..4 {
                assert_eq!(g.generator()[(0, j)], 0.0, "{kind} couples spot to {j}");
            }
        }
        for kind in [ModelKind::Kyle2d, ModelKind::Kyle4d] {
            let g = build_model(kind, &ret, &omega, &xi).unwrap();
            assert!(
                g.generator()[(0, 1)].abs() > 1e-6,
                "{kind} should couple spot and level under nonzero rho"
            );
        }
    }

    /// Delta-neutral option pair: flow along the vega direction moves the
    /// spot with the sign of the spot-level correlation.
    #[test]
    fn kyle2d_vega_flow_moves_spot_with_rho_sign() {
        let model = VolFactorModel::new(1, 0.2, 0.25, 0.0, 1.0).unwrap();
        let spot = 100.0f64;
        let vol = 0.2f64;
        let tau = 1.0f64;
        // Strike with d1 = 0: deltas cancel exactly across the pair.
        let strike = spot * (0.5 * vol * vol * tau).exp();
        let universe = Universe::new(vec![
            Instrument::spot("spot"),
            Instrument::factor("level"),
            Instrument::call("c", strike, tau),
            Instrument::put("p", strike, tau),
        ])
        .unwrap();
        let state = MarketState::new(0.0, spot, vec![vol], 0.0).unwrap();
        let sens = sensitivity_matrix(&universe, &state, &model).unwrap();
        assert!((sens.delta[0] + sens.delta[1]).abs() <= 1e-12);

        for rho in [-0.6f64, 0.6] {
            let sigma_pp = SymMatrix::new(DMatrix::from_row_slice(
                2,
                2,
                &[1.0, rho * 1.0 * 0.02, rho * 1.0 * 0.02, 0.0004],
            ))
            .unwrap();
            let ret = RetCov::new(sigma_pp, None).unwrap();
            let omega =
                FlowCov::from_full(diag(&[100.0, 0.0, 4.0, 4.0]), 2, None).unwrap();
            let impact = build_model(ModelKind::Kyle2d, &ret, &omega, &sens.xi).unwrap();
            // Portfolio flow along the extended vega direction.
            let mut v_c = DVector::zeros(4);
            v_c[1] = 1.0;
            v_c[2] = sens.xi[(0, 1)];
            v_c[3] = sens.xi[(1, 1)];
            let response = impact.full().as_matrix() * v_c;
            assert!(
                response[0] * rho > 0.0,
                "rho {rho}: spot response {}",
                response[0]
            );
        }
    }

    #[test]
    fn dimension_requirements_are_enforced() {
        let ret = RetCov::new(diag(&[0.04, 0.0025]), None).unwrap();
        let omega = FlowCov::from_full(diag(&[25.0, 4.0]), 2, None).unwrap();
        let xi = DMatrix::zeros(0, 2);
        assert!(matches!(
            build_model(ModelKind::Direct4d, &ret, &omega, &xi),
            Err(Error::UnsupportedUniverse { .. })
        ));
        assert!(matches!(
            build_model(ModelKind::Kyle4d, &ret, &omega, &xi),
            Err(Error::UnsupportedUniverse { .. })
        ));
        let spot_only = RetCov::new(diag(&[0.04]), None).unwrap();
        let omega1 = FlowCov::from_full(diag(&[25.0]), 1, None).unwrap();
        assert!(matches!(
            build_model(ModelKind::Kyle2d, &spot_only, &omega1, &DMatrix::zeros(0, 1)),
            Err(Error::UnsupportedUniverse { .. })
        ));
    }

    #[test]
    fn model_names_round_trip() {
        for kind in ModelKind::ALL {
            let parsed: ModelKind = kind.name().parse().unwrap();
            assert_eq!(parsed, kind);
        }
        assert!("kyle-5d".parse::<ModelKind>().is_err());
    }
}
