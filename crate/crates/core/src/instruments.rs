//! Instrument universe, pricing and sensitivities.
//!
//! The underlying coordinates of a universe are a tradeable spot plus Q
//! non-tradeable volatility factors. Derivatives are futures, European
//! options priced by Black-Scholes at an implied volatility that is linear
//! in the factors, and VIX-style futures that track the level factor.
//! The sensitivity routines produce the Jacobian Xi together with the time
//! and curvature sensitivities needed by the drift-consistency conditions.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InstrumentKind {
    SpotUnderlying,
    FactorUnderlying,
    Future,
    CallOption,
    PutOption,
    VixFuture,
}

impl InstrumentKind {
    pub fn is_underlying(self) -> bool {
        matches!(
            self,
            InstrumentKind::SpotUnderlying | InstrumentKind::FactorUnderlying
        )
    }

    pub fn is_derivative(self) -> bool {
        !self.is_underlying()
    }

    /// Non-tradeable coordinates carry no order flow.
    pub fn is_tradeable(self) -> bool {
        self != InstrumentKind::FactorUnderlying
    }
}

/// A single instrument. Strike and maturity apply to derivatives; supplied
/// factor loadings override the model's loading rule when present.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instrument {
    pub id: String,
    pub kind: InstrumentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_loadings: Option<Vec<f64>>,
    /// Position of a factor underlying among the factor coordinates;
    /// assigned by the universe from declaration order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub factor_index: Option<usize>,
}

impl Instrument {
    pub fn spot(id: &str) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::SpotUnderlying,
            strike: None,
            maturity: None,
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn factor(id: &str) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::FactorUnderlying,
            strike: None,
            maturity: None,
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn future(id: &str, maturity: f64) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::Future,
            strike: None,
            maturity: Some(maturity),
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn call(id: &str, strike: f64, maturity: f64) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::CallOption,
            strike: Some(strike),
            maturity: Some(maturity),
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn put(id: &str, strike: f64, maturity: f64) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::PutOption,
            strike: Some(strike),
            maturity: Some(maturity),
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn vix_future(id: &str) -> Self {
        Self {
            id: id.into(),
            kind: InstrumentKind::VixFuture,
            strike: None,
            maturity: None,
            factor_loadings: None,
            factor_index: None,
        }
    }

    pub fn with_loadings(mut self, loadings: Vec<f64>) -> Self {
        self.factor_loadings = Some(loadings);
        self
    }

    fn validate(&self) -> Result<()> {
        let err = |reason: &str| Error::InvalidInstrument {
            id: self.id.clone(),
            reason: reason.into(),
        };
        if self.id.is_empty() {
            return Err(err("empty id"));
        }
        match self.kind {
            InstrumentKind::CallOption | InstrumentKind::PutOption => {
                if self.strike.is_none_or(|k| k <= 0.0) {
                    return Err(err("options require strike > 0"));
                }
                if self.maturity.is_none_or(|t| t <= 0.0) {
                    return Err(err("options require maturity > 0"));
                }
            }
            InstrumentKind::Future => {
                if self.maturity.is_none_or(|t| t <= 0.0) {
                    return Err(err("futures require maturity > 0"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Market state: time, spot, volatility-factor values and the rate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketState {
    pub t: f64,
    pub spot: f64,
    pub factors: Vec<f64>,
    pub rate: f64,
}

impl MarketState {
    pub fn new(t: f64, spot: f64, factors: Vec<f64>, rate: f64) -> Result<Self> {
        if spot <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "spot",
                reason: format!("must be positive, got {spot}"),
            });
        }
        Ok(Self {
            t,
            spot,
            factors,
            rate,
        })
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    /// Underlying coordinate vector (spot, factors...).
    pub fn coordinates(&self) -> DVector<f64> {
        let mut u = DVector::zeros(1 + self.factors.len());
        u[0] = self.spot;
        for (i, &f) in self.factors.iter().enumerate() {
            u[i + 1] = f;
        }
        u
    }

    /// Rebuilds a state from underlying coordinates.
    pub fn from_coordinates(t: f64, coords: &DVector<f64>, rate: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidParameter {
                name: "coords",
                reason: "need at least the spot coordinate".into(),
            });
        }
        Self::new(t, coords[0], coords.as_slice()[1..].to_vec(), rate)
    }
}

/// Linear volatility-factor model: implied vols are beta . factors with
/// level, skew (standardized log-moneyness) and term-structure loadings.
/// VIX futures track the level factor as vix_a + vix_b * level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolFactorModel {
    pub q: usize,
    pub sigma_ref: f64,
    pub tau_ref: f64,
    pub vix_a: f64,
    pub vix_b: f64,
}

impl Default for VolFactorModel {
    fn default() -> Self {
        Self {
            q: 3,
            sigma_ref: 0.2,
            tau_ref: 0.25,
            vix_a: 0.0,
            vix_b: 1.0,
        }
    }
}

/// Loading row of one option together with its spot and time derivatives.
struct LoadingRow {
    beta: DVector<f64>,
    dbeta_dspot: DVector<f64>,
    d2beta_dspot2: DVector<f64>,
    dbeta_dt: DVector<f64>,
}

impl VolFactorModel {
    pub fn new(q: usize, sigma_ref: f64, tau_ref: f64, vix_a: f64, vix_b: f64) -> Result<Self> {
        if q == 0 || q > 3 {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("supported factor counts are 1..=3, got {q}"),
            });
        }
        if sigma_ref <= 0.0 || tau_ref <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma_ref/tau_ref",
                reason: "reference vol and maturity must be positive".into(),
            });
        }
        Ok(Self {
            q,
            sigma_ref,
            tau_ref,
            vix_a,
            vix_b,
        })
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.q, self.sigma_ref, self.tau_ref, self.vix_a, self.vix_b).map(|_| ())
    }

    /// Loading rule for an option: level 1, skew log(K/F)/(sigma_ref
    /// sqrt(tau)), term (sqrt(tau) - sqrt(tau_ref))/sqrt(tau_ref). Only the
    /// first `q` loadings are produced.
    pub fn option_loadings(&self, strike: f64, maturity: f64, state: &MarketState) -> DVector<f64> {
        self.option_loading_row(strike, maturity, state, None).beta
    }

    fn option_loading_row(
        &self,
        strike: f64,
        maturity: f64,
        state: &MarketState,
        supplied: Option<&[f64]>,
    ) -> LoadingRow {
        let q = self.q;
        let mut beta = DVector::zeros(q);
        let mut dbeta_dspot = DVector::zeros(q);
        let mut d2beta_dspot2 = DVector::zeros(q);
        let mut dbeta_dt = DVector::zeros(q);
        if let Some(values) = supplied {
            for (i, &b) in values.iter().take(q).enumerate() {
                beta[i] = b;
            }
            return LoadingRow {
                beta,
                dbeta_dspot,
                d2beta_dspot2,
                dbeta_dt,
            };
        }
        let tau = maturity - state.t;
        let sqrt_tau = tau.sqrt();
        beta[0] = 1.0;
        if q >= 2 {
            // log-moneyness against the forward
            let m = (strike / state.spot).ln() - state.rate * tau;
            let denom = self.sigma_ref * sqrt_tau;
            beta[1] = m / denom;
            dbeta_dspot[1] = -1.0 / (state.spot * denom);
            d2beta_dspot2[1] = 1.0 / (state.spot * state.spot * denom);
            dbeta_dt[1] = state.rate / denom + beta[1] / (2.0 * tau);
        }
        if q >= 3 {
            let sqrt_ref = self.tau_ref.sqrt();
            beta[2] = (sqrt_tau - sqrt_ref) / sqrt_ref;
            dbeta_dt[2] = -1.0 / (2.0 * sqrt_tau * sqrt_ref);
        }
        LoadingRow {
            beta,
            dbeta_dspot,
            d2beta_dspot2,
            dbeta_dt,
        }
    }

    /// Level-only loading row for a VIX future.
    fn vix_loading_row(&self) -> DVector<f64> {
        let mut beta = DVector::zeros(self.q);
        beta[0] = 1.0;
        beta
    }
}

/// Ordered instrument list: spot, then factor underlyings, then derivatives.
#[derive(Debug, Clone)]
pub struct Universe {
    instruments: Vec<Instrument>,
    n_factors: usize,
}

impl Universe {
    pub fn new(mut instruments: Vec<Instrument>) -> Result<Self> {
        if instruments.is_empty() {
            return Err(Error::InvalidUniverse("empty instrument list".into()));
        }
        for inst in &instruments {
            inst.validate()?;
        }
        let mut ids = std::collections::BTreeSet::new();
        for inst in &instruments {
            if !ids.insert(inst.id.clone()) {
                return Err(Error::InvalidUniverse(format!(
                    "duplicate instrument id {}",
                    inst.id
                )));
            }
        }
        if instruments[0].kind != InstrumentKind::SpotUnderlying {
            return Err(Error::InvalidUniverse(
                "first instrument must be the spot underlying".into(),
            ));
        }
        let mut n_factors = 0;
        let mut seen_derivative = false;
        for (i, inst) in instruments.iter_mut().enumerate() {
            match inst.kind {
                InstrumentKind::SpotUnderlying => {
                    if i > 0 {
                        return Err(Error::InvalidUniverse(
                            "multiple spot underlyings".into(),
                        ));
                    }
                }
                InstrumentKind::FactorUnderlying => {
                    if seen_derivative {
                        return Err(Error::InvalidUniverse(
                            "factor underlyings must precede derivatives".into(),
                        ));
                    }
                    inst.factor_index = Some(n_factors);
                    n_factors += 1;
                }
                _ => seen_derivative = true,
            }
        }
        Ok(Self {
            instruments,
            n_factors,
        })
    }

    pub fn instruments(&self) -> &[Instrument] {
        &self.instruments
    }

    pub fn n_factors(&self) -> usize {
        self.n_factors
    }

    /// Number of underlying coordinates (spot + factors).
    pub fn n_underlyings(&self) -> usize {
        1 + self.n_factors
    }

    pub fn n_derivatives(&self) -> usize {
        self.instruments.len() - self.n_underlyings()
    }

    pub fn len(&self) -> usize {
        self.instruments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instruments.is_empty()
    }

    pub fn derivatives(&self) -> &[Instrument] {
        &self.instruments[self.n_underlyings()..]
    }

    /// Indices (within the derivative list) of plain options.
    pub fn option_indices(&self) -> Vec<usize> {
        self.derivatives()
            .iter()
            .enumerate()
            .filter(|(_, inst)| {
                matches!(
                    inst.kind,
                    InstrumentKind::CallOption | InstrumentKind::PutOption
                )
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks the universe against a factor model and a state: matching
    /// factor counts and valid pricing for every derivative.
    pub fn validate_state(&self, state: &MarketState, model: &VolFactorModel) -> Result<()> {
        model.validate()?;
        if state.n_factors() != self.n_factors {
            return Err(Error::DimensionMismatch {
                context: "state factor count",
                expected: self.n_factors,
                got: state.n_factors(),
            });
        }
        let needs_factors = self.derivatives().iter().any(|inst| {
            matches!(
                inst.kind,
                InstrumentKind::CallOption | InstrumentKind::PutOption | InstrumentKind::VixFuture
            )
        });
        if needs_factors && self.n_factors != model.q {
            return Err(Error::InvalidUniverse(format!(
                "universe has {} factor underlyings but the model has {} factors",
                self.n_factors, model.q
            )));
        }
        for inst in self.derivatives() {
            price(inst, state, model)?;
        }
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let instruments: Vec<Instrument> = serde_json::from_str(&text)?;
        Self::new(instruments)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.instruments)?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Analytic sensitivities of every derivative with respect to the underlying
/// coordinates (spot, factors...) at a market state.
#[derive(Debug, Clone)]
pub struct Sensitivities {
    /// M x N Jacobian of derivative prices in the underlying coordinates.
    pub xi: DMatrix<f64>,
    /// M time sensitivities dP/dt.
    pub theta: DVector<f64>,
    /// M curvature slices, each N x N and symmetric.
    pub chi: Vec<DMatrix<f64>>,
    /// Spot column of Xi.
    pub delta: DVector<f64>,
    /// Black-Scholes vega per derivative (level sensitivity for VIX rows).
    pub vega: DVector<f64>,
    /// M x Q block of Xi over the factor coordinates: vega * loadings.
    pub upsilon: DMatrix<f64>,
}

fn expiry_check(inst: &Instrument, t: f64) -> Result<f64> {
    let maturity = inst.maturity.ok_or_else(|| Error::InvalidInstrument {
        id: inst.id.clone(),
        reason: "missing maturity".into(),
    })?;
    if t >= maturity {
        return Err(Error::ExpiredInstrument {
            id: inst.id.clone(),
            t,
            maturity,
        });
    }
    Ok(maturity - t)
}

fn implied_vol_checked(
    inst: &Instrument,
    state: &MarketState,
    model: &VolFactorModel,
) -> Result<f64> {
    let row = model.option_loading_row(
        inst.strike.unwrap_or(0.0),
        inst.maturity.unwrap_or(0.0),
        state,
        inst.factor_loadings.as_deref(),
    );
    if state.factors.len() < model.q {
        return Err(Error::DimensionMismatch {
            context: "state factor count",
            expected: model.q,
            got: state.factors.len(),
        });
    }
    let vol: f64 = (0..model.q).map(|k| row.beta[k] * state.factors[k]).sum();
    if vol <= 0.0 {
        return Err(Error::NegativeVol {
            id: inst.id.clone(),
            vol,
        });
    }
    Ok(vol)
}

/// Implied volatility of an option at the state under the factor model.
pub fn implied_vol(inst: &Instrument, state: &MarketState, model: &VolFactorModel) -> Result<f64> {
    match inst.kind {
        InstrumentKind::CallOption | InstrumentKind::PutOption => {
            expiry_check(inst, state.t)?;
            implied_vol_checked(inst, state, model)
        }
        _ => Err(Error::InvalidInstrument {
            id: inst.id.clone(),
            reason: "implied volatility is defined for options only".into(),
        }),
    }
}

struct BsTerms {
    d1: f64,
    d2: f64,
    sqrt_tau: f64,
    disc_strike: f64,
}

fn bs_terms(spot: f64, strike: f64, rate: f64, tau: f64, vol: f64) -> BsTerms {
    let sqrt_tau = tau.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * vol * vol) * tau) / (vol * sqrt_tau);
    let d2 = d1 - vol * sqrt_tau;
    BsTerms {
        d1,
        d2,
        sqrt_tau,
        disc_strike: strike * (-rate * tau).exp(),
    }
}

/// Prices one instrument at the given state.
///
/// Underlyings price to their own coordinate, futures to the
/// rate-compounded spot, options by Black-Scholes at the factor-model
/// implied volatility, and VIX futures to an affine map of the level factor.
pub fn price(inst: &Instrument, state: &MarketState, model: &VolFactorModel) -> Result<f64> {
    match inst.kind {
        InstrumentKind::SpotUnderlying => Ok(state.spot),
        InstrumentKind::FactorUnderlying => {
            let idx = inst.factor_index.ok_or_else(|| Error::InvalidInstrument {
                id: inst.id.clone(),
                reason: "factor underlying outside a universe".into(),
            })?;
            state
                .factors
                .get(idx)
                .copied()
                .ok_or(Error::DimensionMismatch {
                    context: "factor index",
                    expected: state.factors.len(),
                    got: idx,
                })
        }
        InstrumentKind::Future => {
            let tau = expiry_check(inst, state.t)?;
            Ok((state.rate * tau).exp() * state.spot)
        }
        InstrumentKind::VixFuture => {
            if state.factors.is_empty() {
                return Err(Error::MissingCoordinate("level factor".into()));
            }
            Ok(model.vix_a + model.vix_b * state.factors[0])
        }
        InstrumentKind::CallOption | InstrumentKind::PutOption => {
            let tau = expiry_check(inst, state.t)?;
            let vol = implied_vol_checked(inst, state, model)?;
            let strike = inst.strike.expect("validated");
            let t = bs_terms(state.spot, strike, state.rate, tau, vol);
            let value = if inst.kind == InstrumentKind::CallOption {
                state.spot * norm_cdf(t.d1) - t.disc_strike * norm_cdf(t.d2)
            } else {
                t.disc_strike * norm_cdf(-t.d2) - state.spot * norm_cdf(-t.d1)
            };
            Ok(value)
        }
    }
}

/// Textbook Black-Scholes delta and vega at the factor-model implied vol.
/// Futures have delta e^{r tau} and zero vega; VIX futures have zero delta
/// and report the level sensitivity in the vega slot.
pub fn greeks(inst: &Instrument, state: &MarketState, model: &VolFactorModel) -> Result<(f64, f64)> {
    match inst.kind {
        InstrumentKind::SpotUnderlying => Ok((1.0, 0.0)),
        InstrumentKind::FactorUnderlying => Ok((0.0, 0.0)),
        InstrumentKind::Future => {
            let tau = expiry_check(inst, state.t)?;
            Ok(((state.rate * tau).exp(), 0.0))
        }
        InstrumentKind::VixFuture => Ok((0.0, model.vix_b)),
        InstrumentKind::CallOption | InstrumentKind::PutOption => {
            let tau = expiry_check(inst, state.t)?;
            let vol = implied_vol_checked(inst, state, model)?;
            let strike = inst.strike.expect("validated");
            let t = bs_terms(state.spot, strike, state.rate, tau, vol);
            let delta = if inst.kind == InstrumentKind::CallOption {
                norm_cdf(t.d1)
            } else {
                norm_cdf(t.d1) - 1.0
            };
            let vega = state.spot * norm_pdf(t.d1) * t.sqrt_tau;
            Ok((delta, vega))
        }
    }
}

/// Assembles the sensitivity objects of every derivative in the universe.
///
/// All entries are analytic: the spot column composes the Black-Scholes
/// delta with the spot dependence of the loading rule, the factor block is
/// vega times the loadings, and the curvature slices compose gamma, vanna
/// and volga with the loading derivatives.
pub fn sensitivity_matrix(
    universe: &Universe,
    state: &MarketState,
    model: &VolFactorModel,
) -> Result<Sensitivities> {
    universe.validate_state(state, model)?;
    let n = universe.n_underlyings();
    let m = universe.n_derivatives();
    let q_dims = n - 1;

    let mut xi = DMatrix::zeros(m, n);
    let mut theta = DVector::zeros(m);
    let mut chi = vec![DMatrix::zeros(n, n); m];
    let mut delta = DVector::zeros(m);
    let mut vega = DVector::zeros(m);
    let mut upsilon = DMatrix::zeros(m, q_dims);

    for (row, inst) in universe.derivatives().iter().enumerate() {
        match inst.kind {
            InstrumentKind::Future => {
                let tau = expiry_check(inst, state.t)?;
                let growth = (state.rate * tau).exp();
                xi[(row, 0)] = growth;
                delta[row] = growth;
                theta[row] = -state.rate * growth * state.spot;
            }
            InstrumentKind::VixFuture => {
                xi[(row, 1)] = model.vix_b;
                vega[row] = model.vix_b;
                upsilon[(row, 0)] = model.vix_b;
            }
            InstrumentKind::CallOption | InstrumentKind::PutOption => {
                let tau = expiry_check(inst, state.t)?;
                let strike = inst.strike.expect("validated");
                let loadings = model.option_loading_row(
                    strike,
                    inst.maturity.expect("validated"),
                    state,
                    inst.factor_loadings.as_deref(),
                );
                let vol = implied_vol_checked(inst, state, model)?;
                let t = bs_terms(state.spot, strike, state.rate, tau, vol);

                let bs_delta = if inst.kind == InstrumentKind::CallOption {
                    norm_cdf(t.d1)
                } else {
                    norm_cdf(t.d1) - 1.0
                };
                let bs_vega = state.spot * norm_pdf(t.d1) * t.sqrt_tau;
                let bs_gamma = norm_pdf(t.d1) / (state.spot * vol * t.sqrt_tau);
                let bs_vanna = -norm_pdf(t.d1) * t.d2 / vol;
                let bs_volga = bs_vega * t.d1 * t.d2 / vol;
                let bs_theta = if inst.kind == InstrumentKind::CallOption {
                    -state.spot * norm_pdf(t.d1) * vol / (2.0 * t.sqrt_tau)
                        - state.rate * t.disc_strike * norm_cdf(t.d2)
                } else {
                    -state.spot * norm_pdf(t.d1) * vol / (2.0 * t.sqrt_tau)
                        + state.rate * t.disc_strike * norm_cdf(-t.d2)
                };

                // Implied-vol derivatives induced by the loading rule.
                let factors = DVector::from_column_slice(&state.factors);
                let vol_dspot = loadings.dbeta_dspot.dot(&factors);
                let vol_dspot2 = loadings.d2beta_dspot2.dot(&factors);
                let vol_dt = loadings.dbeta_dt.dot(&factors);

                let full_delta = bs_delta + bs_vega * vol_dspot;
                xi[(row, 0)] = full_delta;
                delta[row] = full_delta;
                vega[row] = bs_vega;
                theta[row] = bs_theta + bs_vega * vol_dt;
                for k in 0..model.q {
                    let u = bs_vega * loadings.beta[k];
                    xi[(row, 1 + k)] = u;
                    upsilon[(row, k)] = u;
                }

                let slice = &mut chi[row];
                slice[(0, 0)] = bs_gamma
                    + 2.0 * bs_vanna * vol_dspot
                    + bs_volga * vol_dspot * vol_dspot
                    + bs_vega * vol_dspot2;
                for k in 0..model.q {
                    let cross = bs_vanna * loadings.beta[k]
                        + bs_volga * vol_dspot * loadings.beta[k]
                        + bs_vega * loadings.dbeta_dspot[k];
                    slice[(0, 1 + k)] = cross;
                    slice[(1 + k, 0)] = cross;
                    for l in 0..model.q {
                        slice[(1 + k, 1 + l)] =
                            bs_volga * loadings.beta[k] * loadings.beta[l];
                    }
                }
            }
            InstrumentKind::SpotUnderlying | InstrumentKind::FactorUnderlying => {
                unreachable!("derivatives() excludes underlyings")
            }
        }
    }

    Ok(Sensitivities {
        xi,
        theta,
        chi,
        delta,
        vega,
        upsilon,
    })
}

/// Factor loading matrix of the derivative list: option rows follow the
/// loading rule, VIX rows load the level only, plain futures load nothing.
pub fn factor_loadings(
    universe: &Universe,
    state: &MarketState,
    model: &VolFactorModel,
) -> Result<DMatrix<f64>> {
    let m = universe.n_derivatives();
    let mut beta = DMatrix::zeros(m, model.q);
    for (row, inst) in universe.derivatives().iter().enumerate() {
        match inst.kind {
            InstrumentKind::CallOption | InstrumentKind::PutOption => {
                let loadings = model.option_loading_row(
                    inst.strike.expect("validated"),
                    inst.maturity.expect("validated"),
                    state,
                    inst.factor_loadings.as_deref(),
                );
                for k in 0..model.q {
                    beta[(row, k)] = loadings.beta[k];
                }
            }
            InstrumentKind::VixFuture => {
                let row_beta = model.vix_loading_row();
                for k in 0..model.q {
                    beta[(row, k)] = row_beta[k];
                }
            }
            _ => {}
        }
    }
    Ok(beta)
}

/// Least-squares factor fit: minimizes |observed - loadings * factors| and
/// returns the factor vector with the residual norm.
pub fn fit_factors(
    observed_vols: &DVector<f64>,
    loadings: &DMatrix<f64>,
) -> Result<(DVector<f64>, f64)> {
    let m = loadings.nrows();
    let q = loadings.ncols();
    if observed_vols.len() != m {
        return Err(Error::DimensionMismatch {
            context: "fit_factors observation count",
            expected: m,
            got: observed_vols.len(),
        });
    }
    let svd = loadings.clone().svd(true, true);
    let sv_max = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * sv_max.max(f64::MIN_POSITIVE))
        .count();
    if rank < q {
        return Err(Error::RankDeficientLoadings { rank, factors: q });
    }
    let solution = svd
        .solve(observed_vols, 1e-12 * sv_max)
        .map_err(|_| Error::RankDeficientLoadings { rank, factors: q })?;
    let residual = (loadings * &solution - observed_vols).norm();
    Ok((solution, residual))
}
