//! Experiment configuration: a single TOML file with every default made
//! explicit when the resolved config is written next to the outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tnmpf::{
    build_hamiltonian, neel_bits, HamiltonianSpec, MatrixProductState, ModelKind, ObservableSpec, ReferenceSpec, Shots,
    SiteOperator, TrotterOrder, TruncationPolicy,
};

/// Chains up to this length also run the dense state-vector path.
pub const DENSE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hamiltonian: HamiltonianConfig,
    /// `"neel"` or an explicit bitstring such as `"0101"`.
    #[serde(default = "default_initial")]
    pub initial_state: String,
    pub t_grid: GridConfig,
    pub k_list: Vec<usize>,
    /// Deep step count for the Trotter test.
    #[serde(default)]
    pub deep_k: Option<usize>,
    #[serde(default = "default_order")]
    pub order: u32,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub shots: ShotsConfig,
    /// Seed for shot sampling.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub aqc: AqcConfig,
    /// Observable labels with 1-based sites, e.g. `"Z6"` or `"Z5Z6"`.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub scaling: ScalingConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianConfig {
    pub kind: ModelKind,
    pub n_sites: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub order: u32,
    /// Reference steps per unit of the largest k.
    pub k0_multiplier: usize,
    /// Longest fourth-order step of the MPS reference trajectory.
    pub dt: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { order: 2, k0_multiplier: 8, dt: 0.025 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleTruncation {
    pub threshold: f64,
    #[serde(default)]
    pub max_bond: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub state: Option<RoleTruncation>,
    pub mpo: Option<RoleTruncation>,
    pub reference: Option<RoleTruncation>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsConfig {
    Count(u64),
    #[serde(with = "exact_str")]
    Exact,
}

impl Default for ShotsConfig {
    fn default() -> Self {
        ShotsConfig::Count(10_000)
    }
}

mod exact_str {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("exact")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "exact" {
            Ok(())
        } else {
            Err(serde::de::Error::custom(format!("shots must be \"exact\" or a count, got {s:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AqcConfig {
    pub enabled: bool,
    pub t1: f64,
    pub k_layers: usize,
    /// Step counts for the appended window; empty means `k_list`.
    #[serde(default)]
    pub suffix_ks: Vec<usize>,
    pub fidelity_floor: f64,
    pub max_iters: usize,
}

impl Default for AqcConfig {
    fn default() -> Self {
        Self { enabled: false, t1: 0.0, k_layers: 2, suffix_ks: Vec::new(), fidelity_floor: 0.99, max_iters: 200 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingConfig {
    /// Thresholds for the state-growth sweep.
    pub thresholds: Vec<f64>,
    /// Times of the state-growth sweep.
    pub state_times: Vec<f64>,
    /// Fixed time of the F-versus-k sweep.
    pub f_time: f64,
    pub f_ks: Vec<usize>,
    /// Fixed step of the F-versus-t sweep.
    pub fixed_dt: f64,
    pub dt_times: Vec<f64>,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![1e-4, 1e-6, 1e-8],
            state_times: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0],
            f_time: 4.0,
            f_ks: vec![8, 12, 16, 24, 32, 48, 64],
            fixed_dt: 0.25,
            dt_times: vec![1.0, 2.0, 3.0, 4.0],
        }
    }
}

fn default_initial() -> String {
    "neel".into()
}
fn default_order() -> u32 {
    2
}
fn default_ridge() -> f64 {
    tnmpf::mpf::DEFAULT_RIDGE
}
fn default_step() -> f64 {
    0.1
}
fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Truncation roles a subcommand relies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    State,
    Mpo,
    Reference,
}

impl Role {
    fn name(self) -> &'static str {
        match self {
            Role::State => "truncation.state",
            Role::Mpo => "truncation.mpo",
            Role::Reference => "truncation.reference",
        }
    }
}

/// Every validation failure at once.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0.join("; "))
    }
}

impl std::error::Error for ConfigErrors {}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigErrors> {
        toml::from_str(text).map_err(|e| ConfigErrors(vec![e.message().to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigErrors> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigErrors(vec![format!("config {}: {e}", path.display())]))?;
        Self::from_toml(&text)
    }

    /// Checks every field constraint and that `roles` are configured.
    pub fn validate(&self, roles: &[Role]) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let n = self.hamiltonian.n_sites;
        if n < 2 {
            errs.push(format!("hamiltonian.n_sites: need at least 2 sites, got {n}"));
        }
        if self.initial_state != "neel" {
            if self.initial_state.len() != n {
                errs.push(format!("initial_state: {} bits for {n} sites", self.initial_state.len()));
            }
            if !self.initial_state.chars().all(|c| c == '0' || c == '1') {
                errs.push(format!("initial_state: expected \"neel\" or a bitstring, got {:?}", self.initial_state));
            }
        }
        let g = self.t_grid;
        if !(g.step > 0.0) {
            errs.push(format!("t_grid.step: must be > 0, got {}", g.step));
        }
        if !(g.start >= 0.0) {
            errs.push(format!("t_grid.start: must be >= 0, got {}", g.start));
        }
        if !(g.stop >= g.start) {
            errs.push(format!("t_grid.stop: must be >= start, got {} < {}", g.stop, g.start));
        }
        if self.k_list.is_empty() {
            errs.push("k_list: must not be empty".into());
        }
        if self.k_list.first() == Some(&0) || self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            errs.push(format!("k_list: must be strictly increasing positive integers, got {:?}", self.k_list));
        }
        if let Some(d) = self.deep_k {
            if self.k_list.last().is_some_and(|&k| d <= k) {
                errs.push(format!("deep_k: must exceed every k in k_list, got {d}"));
            }
        }
        if TrotterOrder::from_int(self.order).is_err() {
            errs.push(format!("order: must be 2 or 4, got {}", self.order));
        }
        if TrotterOrder::from_int(self.reference.order).is_err() {
            errs.push(format!("reference.order: must be 2 or 4, got {}", self.reference.order));
        }
        if self.reference.k0_multiplier == 0 {
            errs.push("reference.k0_multiplier: must be >= 1".into());
        }
        if !(self.reference.dt > 0.0) {
            errs.push(format!("reference.dt: must be > 0, got {}", self.reference.dt));
        }
        for (role, t) in [(Role::State, self.truncation.state), (Role::Mpo, self.truncation.mpo), (Role::Reference, self.truncation.reference)] {
            match t {
                Some(t) => {
                    if !(0.0..1.0).contains(&t.threshold) {
                        errs.push(format!("{}.threshold: must lie in [0, 1), got {}", role.name(), t.threshold));
                    }
                    if t.max_bond == Some(0) {
                        errs.push(format!("{}.max_bond: must be >= 1", role.name()));
                    }
                }
                None if roles.contains(&role) => errs.push(format!("{}: required by this command but not configured", role.name())),
                None => {}
            }
        }
        if self.shots == ShotsConfig::Count(0) {
            errs.push("shots: must be \"exact\" or a positive count".into());
        }
        if !(self.ridge >= 0.0) {
            errs.push(format!("ridge: must be >= 0, got {}", self.ridge));
        }
        for label in &self.observables {
            if let Err(e) = parse_observable(label, n) {
                errs.push(format!("observables: {e}"));
            }
        }
        let a = &self.aqc;
        if !(a.t1 >= 0.0) {
            errs.push(format!("aqc.t1: must be >= 0, got {}", a.t1));
        }
        if a.k_layers == 0 {
            errs.push("aqc.k_layers: must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&a.fidelity_floor) {
            errs.push(format!("aqc.fidelity_floor: must lie in [0, 1], got {}", a.fidelity_floor));
        }
        if a.suffix_ks.first() == Some(&0) || a.suffix_ks.windows(2).any(|w| w[0] >= w[1]) {
            errs.push(format!("aqc.suffix_ks: must be strictly increasing positive integers, got {:?}", a.suffix_ks));
        }
        let s = &self.scaling;
        if s.thresholds.iter().any(|t| !(0.0..1.0).contains(t)) {
            errs.push("scaling.thresholds: must lie in [0, 1)".into());
        }
        if s.state_times.iter().any(|t| !(*t > 0.0)) || s.state_times.windows(2).any(|w| w[0] >= w[1]) {
            errs.push("scaling.state_times: must be positive and increasing".into());
        }
        if !(s.f_time > 0.0) {
            errs.push(format!("scaling.f_time: must be > 0, got {}", s.f_time));
        }
        if s.f_ks.contains(&0) {
            errs.push("scaling.f_ks: step counts must be positive".into());
        }
        if !(s.fixed_dt > 0.0) {
            errs.push(format!("scaling.fixed_dt: must be > 0, got {}", s.fixed_dt));
        }
        if s.dt_times.iter().any(|t| !(*t > 0.0)) {
            errs.push("scaling.dt_times: must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    pub fn hamiltonian(&self) -> tnmpf::Result<HamiltonianSpec> {
        build_hamiltonian(self.hamiltonian.kind, self.hamiltonian.n_sites, self.hamiltonian.seed)
    }

    pub fn initial(&self) -> tnmpf::Result<MatrixProductState> {
        let bits = if self.initial_state == "neel" { neel_bits(self.hamiltonian.n_sites) } else { self.initial_state.clone() };
        MatrixProductState::product_state(&bits)
    }

    pub fn times(&self) -> tnmpf::Result<Vec<f64>> {
        tnmpf::time_grid(self.t_grid.start, self.t_grid.stop, self.t_grid.step)
    }

    pub fn trotter_order(&self) -> TrotterOrder {
        TrotterOrder::from_int(self.order).unwrap_or(TrotterOrder::Second)
    }

    /// Reference circuit spec sized from the largest step count in use.
    pub fn reference_spec(&self) -> ReferenceSpec {
        let kmax = self.k_list.iter().chain(&self.deep_k).copied().max().unwrap_or(1);
        ReferenceSpec {
            order: TrotterOrder::from_int(self.reference.order).unwrap_or(TrotterOrder::Second),
            k0: self.reference.k0_multiplier * kmax,
        }
    }

    pub fn state_policy(&self) -> TruncationPolicy {
        role_policy(self.truncation.state, TruncationPolicy::for_states)
    }

    pub fn mpo_policy(&self) -> TruncationPolicy {
        role_policy(self.truncation.mpo, TruncationPolicy::for_operators)
    }

    pub fn reference_policy(&self) -> TruncationPolicy {
        role_policy(self.truncation.reference, TruncationPolicy::for_states)
    }

    pub fn shots(&self) -> Shots {
        match self.shots {
            ShotsConfig::Exact => Shots::Exact,
            ShotsConfig::Count(n) => Shots::Count(n),
        }
    }

    pub fn observables(&self) -> Vec<ObservableSpec> {
        self.observables
            .iter()
            .filter_map(|l| parse_observable(l, self.hamiltonian.n_sites).ok())
            .collect()
    }

    pub fn dense_enabled(&self) -> bool {
        self.hamiltonian.n_sites <= DENSE_CAP
    }
}

fn role_policy(t: Option<RoleTruncation>, make: fn(f64, Option<usize>) -> TruncationPolicy) -> TruncationPolicy {
    t.map(|t| make(t.threshold, t.max_bond)).unwrap_or_else(TruncationPolicy::exact)
}

/// Parses labels such as `Z6` or `X3Z4` (1-based sites).
pub fn parse_observable(label: &str, n_sites: usize) -> Result<ObservableSpec, String> {
    let mut factors = Vec::new();
    let mut chars = label.trim().chars().peekable();
    while let Some(c) = chars.next() {
        let op = match c.to_ascii_uppercase() {
            'X' => SiteOperator::X,
            'Y' => SiteOperator::Y,
            'Z' => SiteOperator::Z,
            'I' => SiteOperator::I,
            other => return Err(format!("{label:?}: unknown operator {other:?}")),
        };
        let mut digits = String::new();
        while let Some(d) = chars.peek().filter(|d| d.is_ascii_digit()) {
            digits.push(*d);
            chars.next();
        }
        let site: usize = digits.parse().map_err(|_| format!("{label:?}: operator {c} lacks a site number"))?;
        if site == 0 || site > n_sites {
            return Err(format!("{label:?}: site {site} outside 1..={n_sites}"));
        }
        factors.push((site - 1, op));
    }
    if factors.is_empty() {
        return Err("empty observable label".into());
    }
    ObservableSpec::new(factors).map_err(|e| format!("{label:?}: {e}"))
}
