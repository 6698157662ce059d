use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use super::geometry::WindowGeometry;
use super::streams::{Purpose, StreamKey};
use crate::beamforming::{design_first_stage, design_precoder, design_second_stage, hbf_phase_proxy};
use crate::channel::{assemble_channel, draw_fading, ArrayGeometry};
use crate::error::{Error, Result};
use crate::estimation::{
    estimate_downlink_effective, estimate_downlink_precoded, estimate_uplink_effective, estimate_uplink_full,
    PilotBook, PilotNoise,
};
use crate::linalg::{identity_like, CMat};
use crate::rate::{se_perfect_csi_colored, se_perfect_csi_subcarrier, SePerfectInput, UatfSample};

/// The beamforming strategies compared by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Perfect CSI, everything redesigned every block.
    IdealDbf,
    /// Pilot-based full-dimension procedure every block.
    ProposedUpdatedQ,
    /// Full procedure in the first block of a window, compressed procedure after.
    ProposedFixedQ,
    /// Both combiners frozen at the very first block of the trial.
    FixedQAndW,
    /// Frequency-common constant-modulus first stage.
    HbfProxy,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::IdealDbf, Method::ProposedUpdatedQ, Method::ProposedFixedQ, Method::FixedQAndW, Method::HbfProxy];

    pub fn label(self) -> &'static str {
        match self {
            Method::IdealDbf => "ideal_dbf",
            Method::ProposedUpdatedQ => "proposed_updated_q",
            Method::ProposedFixedQ => "proposed_fixed_q",
            Method::FixedQAndW => "fixed_q_and_w",
            Method::HbfProxy => "hbf_proxy",
        }
    }

    /// Whether the first-stage combiner has orthonormal columns.
    fn orthonormal_first_stage(self) -> bool {
        self != Method::HbfProxy
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

/// Outputs of one block for one method.
#[derive(Debug, Clone)]
pub struct BlockResult {
    pub tau: usize,
    /// Genie SE per subcarrier, before the overhead factor.
    pub genie: Vec<f64>,
    /// UatF contribution per subcarrier.
    pub uatf: Vec<UatfSample>,
    pub q_updated: bool,
    pub w_updated: bool,
    /// `Q[nu]` used in this block.
    pub first_stage: Vec<CMat>,
}

impl BlockResult {
    pub fn mean_genie(&self) -> f64 {
        self.genie.iter().sum::<f64>() / self.genie.len() as f64
    }
}

#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window_index: usize,
    pub method: Method,
    pub per_block: Vec<BlockResult>,
}

impl WindowResult {
    /// Genie SE averaged over blocks and subcarriers, before the overhead factor.
    pub fn mean_genie(&self) -> f64 {
        self.per_block.iter().map(BlockResult::mean_genie).sum::<f64>() / self.per_block.len() as f64
    }
}

/// Combiners carried from the first block of a trial by [`Method::FixedQAndW`].
#[derive(Debug, Clone, Default)]
pub struct TrialState {
    frozen: Option<(Vec<CMat>, Vec<CMat>)>,
    origin: Option<StreamKey>,
}

/// One design: per-subcarrier precoder, first stage and second stage.
#[derive(Debug, Clone)]
struct Design {
    f: Vec<CMat>,
    q: Vec<CMat>,
    w: Vec<CMat>,
}

/// Result of the full-dimension pilot procedure.
#[derive(Debug, Clone)]
struct FullProcedure {
    f: Vec<CMat>,
    b_hat: Vec<CMat>,
    q: Vec<CMat>,
}

/// Runs windows of the scenario for a fixed configuration.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ScenarioConfig,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    pilots: PilotBook,
    tx_power: f64,
    ue_power: f64,
}

impl Simulator {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            tx: ArrayGeometry::new(cfg.num_tx, cfg.antenna_spacing)?,
            rx: ArrayGeometry::new(cfg.num_rx, cfg.antenna_spacing)?,
            pilots: PilotBook::new(cfg.num_rx, cfg.num_compressed, cfg.num_streams, cfg.pilot_length)?,
            tx_power: cfg.tx_power(),
            ue_power: cfg.ue_power(),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Replaces the noise-normalised BS power.
    pub fn with_tx_power(mut self, tx_power: f64) -> Self {
        self.tx_power = tx_power;
        self
    }

    pub fn tx_power(&self) -> f64 {
        self.tx_power
    }

    /// Per-subcarrier channel of block `tau`, drawn from the fading stream of `key.block(tau)`.
    pub fn draw_channel(&self, geometry: &WindowGeometry, key: StreamKey, tau: usize) -> Result<Vec<CMat>> {
        let mut rng = key.block(tau as u32).rng(Purpose::Fading);
        let fading = draw_fading(&mut rng, &geometry.clusters);
        let block = assemble_channel(&self.rx, &self.tx, &geometry.clusters, fading, self.cfg.num_subcarriers, tau)?;
        Ok(block.per_subcarrier)
    }

    /// State of a trial whose combiners were frozen at the first block of
    /// `geometry`, as if that window had already been run.
    pub fn initial_state(&self, geometry: &WindowGeometry, key: StreamKey) -> Result<TrialState> {
        let h = self.draw_channel(geometry, key, 0)?;
        let mut rng = key.block(0).rng(Purpose::FullNoise);
        let p = self.full_procedure(&h, Some(&mut rng))?;
        let d = self.with_identity_w(p.f, p.q);
        Ok(TrialState { frozen: Some((d.q, d.w)), origin: Some(key) })
    }

    /// Algorithm under test: first stage fixed for the window.
    pub fn run_window(&self, geometry: &WindowGeometry, key: StreamKey) -> Result<WindowResult> {
        let mut state = TrialState::default();
        let mut out = self.run_window_methods(geometry, &[Method::ProposedFixedQ], key, &mut state)?;
        Ok(out.remove(0))
    }

    /// Runs one window for several methods on common channel and noise draws.
    ///
    /// `state` must be shared across the windows of one trial, in order, for
    /// [`Method::FixedQAndW`].
    pub fn run_window_methods(
        &self,
        geometry: &WindowGeometry,
        methods: &[Method],
        key: StreamKey,
        state: &mut TrialState,
    ) -> Result<Vec<WindowResult>> {
        let nc = self.cfg.num_compressed;
        let mut results: Vec<WindowResult> = methods
            .iter()
            .map(|&method| WindowResult {
                window_index: geometry.window_index,
                method,
                per_block: Vec::with_capacity(self.cfg.blocks_per_window),
            })
            .collect();
        let mut window_q: Option<Vec<CMat>> = None;
        let mut window_proxy: Option<Vec<CMat>> = None;

        for tau in 0..self.cfg.blocks_per_window {
            let h = self.draw_channel(geometry, key, tau)?;
            let block_key = key.block(tau as u32);
            let mut full: Option<FullProcedure> = None;
            let mut effective: Option<Design> = None;

            for (method, result) in methods.iter().zip(results.iter_mut()) {
                let (design, q_updated, w_updated) = match method {
                    Method::IdealDbf => {
                        let p = self.full_procedure(&h, None)?;
                        (self.with_identity_w(p.f, p.q), true, true)
                    }
                    Method::ProposedUpdatedQ => {
                        let p = self.cached_full(&h, block_key, &mut full)?;
                        (self.with_identity_w(p.f.clone(), p.q.clone()), true, true)
                    }
                    Method::ProposedFixedQ => {
                        if tau == 0 {
                            let p = self.cached_full(&h, block_key, &mut full)?;
                            window_q = Some(p.q.clone());
                            (self.with_identity_w(p.f.clone(), p.q.clone()), true, true)
                        } else {
                            let q = window_q.as_ref().expect("first stage designed at the first block");
                            if effective.is_none() {
                                effective = Some(self.effective_procedure(&h, q, false, block_key)?);
                            }
                            (effective.clone().expect("just computed"), false, true)
                        }
                    }
                    Method::FixedQAndW => match &state.frozen {
                        Some(_) if tau == 0 && state.origin == Some(key) => {
                            let p = self.cached_full(&h, block_key, &mut full)?;
                            (self.with_identity_w(p.f.clone(), p.q.clone()), true, true)
                        }
                        None => {
                            let p = self.cached_full(&h, block_key, &mut full)?;
                            let d = self.with_identity_w(p.f.clone(), p.q.clone());
                            state.frozen = Some((d.q.clone(), d.w.clone()));
                            state.origin = Some(key);
                            (d, true, true)
                        }
                        Some((q, w)) => {
                            let mut rng = block_key.rng(Purpose::EffectiveNoise);
                            let f = self.effective_uplink(&h, q, &mut rng)?;
                            (Design { f, q: q.clone(), w: w.clone() }, false, false)
                        }
                    },
                    Method::HbfProxy => {
                        if tau == 0 {
                            let p = self.cached_full(&h, block_key, &mut full)?;
                            let proxy = hbf_phase_proxy(&p.b_hat, nc, geometry.window_index)?.matrix;
                            let q = vec![proxy; h.len()];
                            window_proxy = Some(q.clone());
                            (self.with_identity_w(p.f.clone(), q), true, true)
                        } else {
                            let q = window_proxy.as_ref().expect("proxy designed at the first block");
                            (self.effective_procedure(&h, q, true, block_key)?, false, true)
                        }
                    }
                };
                result.per_block.push(self.evaluate(&h, design, tau, method.orthonormal_first_stage(), q_updated, w_updated)?);
            }
        }
        Ok(results)
    }

    fn with_identity_w(&self, f: Vec<CMat>, q: Vec<CMat>) -> Design {
        let w = vec![identity_like(self.cfg.num_compressed, self.cfg.num_streams); f.len()];
        Design { f, q, w }
    }

    fn noise(&self) -> PilotNoise<'static> {
        if self.cfg.pilot_noise {
            PilotNoise::White
        } else {
            PilotNoise::Off
        }
    }

    fn cached_full<'a>(
        &self,
        h: &[CMat],
        key: StreamKey,
        slot: &'a mut Option<FullProcedure>,
    ) -> Result<&'a FullProcedure> {
        if slot.is_none() {
            let mut rng = key.rng(Purpose::FullNoise);
            *slot = Some(self.full_procedure(h, Some(&mut rng))?);
        }
        Ok(slot.as_ref().expect("just filled"))
    }

    /// Uplink estimate of `H`, precoder, downlink estimate of `B = H F` and
    /// `Q` from `B_hat`. `rng = None` means perfect CSI.
    fn full_procedure(&self, h: &[CMat], mut rng: Option<&mut ChaCha8Rng>) -> Result<FullProcedure> {
        let ns = self.cfg.num_streams;
        let mut f = Vec::with_capacity(h.len());
        let mut b_hat = Vec::with_capacity(h.len());
        for hn in h {
            let (fn_, bn) = match rng.as_deref_mut() {
                None => {
                    let p = design_precoder(hn, ns, self.tx_power)?.matrix;
                    let b = hn * &p;
                    (p, b)
                }
                Some(r) => {
                    let h_hat = estimate_uplink_full(hn, &self.pilots.uplink_full, self.ue_power, self.noise(), r)?;
                    let p = design_precoder(&h_hat.estimate, ns, self.tx_power)?.matrix;
                    let b = hn * &p;
                    let b_hat = estimate_downlink_precoded(&b, &self.pilots.downlink_precoded, self.noise(), r)?;
                    (p, b_hat.estimate)
                }
            };
            f.push(fn_);
            b_hat.push(bn);
        }
        let q = design_first_stage(&b_hat, self.cfg.num_compressed, 0)?.into_iter().map(|c| c.matrix).collect();
        Ok(FullProcedure { f, b_hat, q })
    }

    fn effective_uplink(&self, h: &[CMat], q: &[CMat], rng: &mut ChaCha8Rng) -> Result<Vec<CMat>> {
        h.iter()
            .zip(q)
            .map(|(hn, qn)| {
                let g = qn.adjoint() * hn;
                let g_hat = estimate_uplink_effective(&g, &self.pilots.uplink_effective, self.ue_power, self.noise(), rng)?;
                Ok(design_precoder(&g_hat.estimate, self.cfg.num_streams, self.tx_power)?.matrix)
            })
            .collect()
    }

    /// Compressed procedure: uplink estimate of `G = Q^H H`, precoder from
    /// `G_hat`, downlink estimate of `D = Q^H H F`, `W` from `D_hat`.
    /// `shaped` colours the downlink noise by `Q`.
    fn effective_procedure(&self, h: &[CMat], q: &[CMat], shaped: bool, key: StreamKey) -> Result<Design> {
        let mut rng = key.rng(Purpose::EffectiveNoise);
        let ns = self.cfg.num_streams;
        let mut f = Vec::with_capacity(h.len());
        let mut w = Vec::with_capacity(h.len());
        for (hn, qn) in h.iter().zip(q) {
            let g = qn.adjoint() * hn;
            let g_hat = estimate_uplink_effective(&g, &self.pilots.uplink_effective, self.ue_power, self.noise(), &mut rng)?;
            let p = design_precoder(&g_hat.estimate, ns, self.tx_power)?.matrix;
            let d = &g * &p;
            let noise = match (self.cfg.pilot_noise, shaped) {
                (false, _) => PilotNoise::Off,
                (true, false) => PilotNoise::White,
                (true, true) => PilotNoise::Shaped(qn),
            };
            let d_hat = estimate_downlink_effective(&d, &self.pilots.downlink_effective, noise, &mut rng)?;
            w.push(design_second_stage(&d_hat.estimate, ns)?.matrix);
            f.push(p);
        }
        Ok(Design { f, q: q.to_vec(), w })
    }

    fn evaluate(
        &self,
        h: &[CMat],
        design: Design,
        tau: usize,
        orthonormal: bool,
        q_updated: bool,
        w_updated: bool,
    ) -> Result<BlockResult> {
        let mut genie = Vec::with_capacity(h.len());
        let mut uatf = Vec::with_capacity(h.len());
        for (nu, hn) in h.iter().enumerate() {
            let (f, q, w) = (&design.f[nu], &design.q[nu], &design.w[nu]);
            let input = SePerfectInput { channel: hn, precoder: f, first_stage: q, second_stage: w };
            genie.push(if orthonormal { se_perfect_csi_subcarrier(input)? } else { se_perfect_csi_colored(input)? });
            let d = q.adjoint() * hn * f;
            uatf.push(if orthonormal { UatfSample::orthonormal(w, &d)? } else { UatfSample::with_first_stage(q, w, &d)? });
        }
        Ok(BlockResult { tau, genie, uatf, q_updated, w_updated, first_stage: design.q })
    }
}
