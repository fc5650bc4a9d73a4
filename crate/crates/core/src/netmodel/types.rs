use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex per-unit quantity.
pub type C64 = Complex64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u64);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ElementId(pub u64);

impl fmt::Display for ElementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A conductor phase. `P` is the positive-sequence "phase" of transmission buses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    P,
    A,
    B,
    C,
}

impl Phase {
    pub const ABC: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    /// Slot in per-phase arrays. The positive-sequence phase shares slot 0 with `A`.
    pub fn slot(self) -> usize {
        match self {
            Phase::P | Phase::A => 0,
            Phase::B => 1,
            Phase::C => 2,
        }
    }

    /// Nominal balanced angle in radians: a (and p) at 0, b at -120°, c at +120°.
    pub fn nominal_angle(self) -> f64 {
        use std::f64::consts::PI;
        match self {
            Phase::P | Phase::A => 0.0,
            Phase::B => -2.0 * PI / 3.0,
            Phase::C => 2.0 * PI / 3.0,
        }
    }

    /// Unit phasor at the nominal angle.
    pub fn rotation(self) -> C64 {
        C64::from_polar(1.0, self.nominal_angle())
    }

    fn bit(self) -> u8 {
        match self {
            Phase::P => 1,
            Phase::A => 2,
            Phase::B => 4,
            Phase::C => 8,
        }
    }

    pub fn label(self) -> char {
        match self {
            Phase::P => 'p',
            Phase::A => 'a',
            Phase::B => 'b',
            Phase::C => 'c',
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Set of phases present at a bus or on an element.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const EMPTY: PhaseSet = PhaseSet(0);
    pub const POSITIVE: PhaseSet = PhaseSet(1);
    pub const ABC: PhaseSet = PhaseSet(2 | 4 | 8);

    pub fn from_phases<I: IntoIterator<Item = Phase>>(phases: I) -> Self {
        PhaseSet(phases.into_iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn contains(self, phase: Phase) -> bool {
        self.0 & phase.bit() != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_positive(self) -> bool {
        self == PhaseSet::POSITIVE
    }

    /// Non-empty subset of {a, b, c}.
    pub fn is_three_phase(self) -> bool {
        !self.is_empty() && self.0 & 1 == 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        [Phase::P, Phase::A, Phase::B, Phase::C]
            .into_iter()
            .filter(move |p| self.contains(*p))
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{}", p.label())?;
        }
        Ok(())
    }
}

impl FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = PhaseSet::EMPTY;
        for ch in s.chars() {
            let phase = match ch.to_ascii_lowercase() {
                'p' => Phase::P,
                'a' => Phase::A,
                'b' => Phase::B,
                'c' => Phase::C,
                other => return Err(format!("unknown phase '{other}' in \"{s}\"")),
            };
            if set.contains(phase) {
                return Err(format!("phase '{ch}' repeated in \"{s}\""));
            }
            set = PhaseSet(set.0 | phase.bit());
        }
        Ok(set)
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    Pv,
    Pq,
    FeederHead,
    LoadNode,
    InternalNode,
}

impl BusKind {
    pub fn is_transmission(self) -> bool {
        matches!(self, BusKind::Slack | BusKind::Pv | BusKind::Pq)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub name: String,
    pub kind: BusKind,
    pub phases: PhaseSet,
    pub base_kv: f64,
    /// Initial per-phase voltage (slot-indexed). `None` means flat start.
    pub v_init: Option<[C64; 3]>,
}

impl Bus {
    pub fn is_transmission(&self) -> bool {
        self.kind.is_transmission()
    }

    /// Flat-start voltage for `phase`: 1∠0 for positive sequence, the balanced set for a/b/c.
    pub fn flat_voltage(phase: Phase) -> C64 {
        phase.rotation()
    }

    pub fn initial_voltage(&self, phase: Phase) -> C64 {
        match self.v_init {
            Some(v) => v[phase.slot()],
            None => Bus::flat_voltage(phase),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Line,
    Transformer,
}

/// 3×3 complex phase-frame matrix indexed by phase slot (a, b, c).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatrix(pub [[C64; 3]; 3]);

impl PhaseMatrix {
    pub fn zero() -> Self {
        PhaseMatrix([[C64::new(0.0, 0.0); 3]; 3])
    }

    pub fn diagonal(values: [C64; 3]) -> Self {
        let mut m = PhaseMatrix::zero();
        for (k, v) in values.into_iter().enumerate() {
            m.0[k][k] = v;
        }
        m
    }

    pub fn get(&self, i: Phase, j: Phase) -> C64 {
        self.0[i.slot()][j.slot()]
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self
            .0
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        (0..3).all(|i| (0..3).all(|j| (self.0[i][j] - self.0[j][i]).norm() <= rel_tol * scale))
    }

    pub fn scale(&self, k: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= k);
        m
    }
}

/// How a three-phase branch's series admittance maps onto its terminals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Winding {
    /// Lines and grounded-wye/grounded-wye banks: `[[Y, -Y], [-Y, Y]]`.
    Series,
    /// Delta primary (from side), grounded-wye secondary (to side).
    DeltaWye,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BranchModel {
    /// π-model with off-nominal tap on the from side.
    Positive {
        y_series: C64,
        b_charging: f64,
        tap: f64,
        shift: f64,
    },
    /// Phase-frame series admittance over the element's phases.
    ThreePhase {
        phases: PhaseSet,
        y: PhaseMatrix,
        winding: Winding,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesElement {
    pub id: ElementId,
    pub from: BusId,
    pub to: BusId,
    pub kind: ElementKind,
    pub model: BranchModel,
}

impl SeriesElement {
    pub fn phases(&self) -> PhaseSet {
        match &self.model {
            BranchModel::Positive { .. } => PhaseSet::POSITIVE,
            BranchModel::ThreePhase { phases, .. } => *phases,
        }
    }
}

/// Shunt admittance to ground, per phase (slot 0 for positive sequence).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shunt {
    pub bus: BusId,
    pub y: [C64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connection {
    Wye,
    Delta,
}

/// Constant-impedance, constant-current and constant-power shares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Zip {
    pub z: f64,
    pub i: f64,
    pub p: f64,
}

impl Zip {
    pub const CONSTANT_POWER: Zip = Zip {
        z: 0.0,
        i: 0.0,
        p: 1.0,
    };

    pub fn is_valid(&self) -> bool {
        let in_range = |x: f64| (0.0..=1.0).contains(&x);
        in_range(self.z) && in_range(self.i) && in_range(self.p) && (self.z + self.i + self.p - 1.0).abs() <= 1e-12
    }
}

impl Default for Zip {
    fn default() -> Self {
        Zip::CONSTANT_POWER
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LoadClass {
    Demand,
    /// Fixed generation modeled as negative load (MATPOWER generators at PQ buses).
    Generation,
    /// Distributed resource, negative load tagged with a scaling group.
    Der { group: String },
}

/// Per-phase complex demand. For delta loads slot a/b/c is leg ab/bc/ca.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub bus: BusId,
    pub connection: Connection,
    pub power: [C64; 3],
    pub zip: Zip,
    pub class: LoadClass,
}

impl Load {
    pub fn is_zero(&self) -> bool {
        self.power.iter().all(|s| s.norm() == 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub p: f64,
    pub v_set: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub in_service: bool,
    pub q_init: f64,
}

/// Ideal positive-sequence source at a transmission slack bus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlackSource {
    pub bus: BusId,
    pub voltage: C64,
}

/// Six-terminal to two-terminal interface between a transmission bus and a feeder head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPort {
    pub name: String,
    pub transmission_bus: BusId,
    pub feeder_head: BusId,
}

/// Ideal balanced three-phase source pinning a feeder head to rotations of `voltage`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadSource {
    pub bus: BusId,
    pub voltage: C64,
    /// Conductance to the pinned voltage on each head phase, with a matching
    /// injection so it carries no current while the head sits at the source value.
    #[serde(default)]
    pub feedback: f64,
}

/// Current drawn from a positive-sequence bus: `current + conductance * V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentInjection {
    pub bus: BusId,
    pub current: C64,
    #[serde(default)]
    pub conductance: f64,
}

/// Combined transmission and distribution network, per-unit on `s_base_mva`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub s_base_mva: f64,
    pub buses: Vec<Bus>,
    pub elements: Vec<SeriesElement>,
    pub shunts: Vec<Shunt>,
    pub loads: Vec<Load>,
    pub generators: Vec<Generator>,
    pub slacks: Vec<SlackSource>,
    pub ports: Vec<CouplingPort>,
    pub head_sources: Vec<HeadSource>,
    pub injections: Vec<CurrentInjection>,
}

impl Network {
    pub fn bus(&self, id: BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| b.id == id)
    }

    pub fn bus_mut(&mut self, id: BusId) -> Option<&mut Bus> {
        self.buses.iter_mut().find(|b| b.id == id)
    }

    pub fn max_bus_id(&self) -> u64 {
        self.buses.iter().map(|b| b.id.0).max().unwrap_or(0)
    }

    /// In-service generator regulating `bus`, if any.
    pub fn regulating_generator(&self, bus: BusId) -> Option<&Generator> {
        self.generators.iter().find(|g| g.bus == bus && g.in_service)
    }

    pub fn generator_mut(&mut self, bus: BusId) -> Option<&mut Generator> {
        self.generators.iter_mut().find(|g| g.bus == bus)
    }

    /// Scale demand (P and Q) and generator real power by a loading factor.
    /// With `feeders_only` the transmission side is left untouched.
    pub fn scale_loading(&mut self, factor: f64, feeders_only: bool) {
        let transmission: std::collections::HashSet<BusId> = self
            .buses
            .iter()
            .filter(|b| b.is_transmission())
            .map(|b| b.id)
            .collect();
        for load in &mut self.loads {
            if feeders_only && transmission.contains(&load.bus) {
                continue;
            }
            match load.class {
                LoadClass::Demand => load.power.iter_mut().for_each(|s| *s *= factor),
                LoadClass::Generation => load.power.iter_mut().for_each(|s| s.re *= factor),
                LoadClass::Der { .. } => {}
            }
        }
        if !feeders_only {
            for g in &mut self.generators {
                g.p *= factor;
            }
        }
    }

    /// Scale distributed-resource injections, optionally only those in `group`.
    pub fn scale_ders(&mut self, factor: f64, group: Option<&str>) {
        for load in &mut self.loads {
            if let LoadClass::Der { group: g } = &load.class {
                if group.is_none_or(|want| want == g) {
                    load.power.iter_mut().for_each(|s| *s *= factor);
                }
            }
        }
    }

    /// Take the generator at `bus` out of service; a PV bus falls back to PQ.
    pub fn outage_generator(&mut self, bus: BusId) -> bool {
        let mut found = false;
        for g in self.generators.iter_mut().filter(|g| g.bus == bus) {
            g.in_service = false;
            found = true;
        }
        if found {
            if let Some(b) = self.bus_mut(bus) {
                if b.kind == BusKind::Pv {
                    b.kind = BusKind::Pq;
                }
            }
        }
        found
    }

    pub fn remove_element(&mut self, id: ElementId) -> bool {
        let before = self.elements.len();
        self.elements.retain(|e| e.id != id);
        before != self.elements.len()
    }
}
