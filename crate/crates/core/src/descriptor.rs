//! Plant descriptor documents: parsing, validation, inheritance and seeding.
//!
//! Precedence when resolving a value is per-organ, then per-node, then the
//! document's globals, then the built-in family default. Per-node list keys
//! (`stem-diameter-mm`, `stalk-kappa`, ...) accept either one value per node or
//! a single scalar that is broadcast. Node override keys are 0-based indices
//! into `node-z`.

use std::collections::BTreeMap;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::frame::{azimuth_axis, KappaTerm};
use crate::leaf::{HingeSpec, LeafParams};
use crate::{Family, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DescriptorError {
    #[error("{message}{}", location.map(|(l, c)| format!(" (line {l}, column {c})")).unwrap_or_default())]
    Parse { message: String, location: Option<(usize, usize)> },
    #[error("missing required key(s): {}", .0.join(", "))]
    MissingKeys(Vec<String>),
    #[error("`{0}` is not a finite number")]
    NonFinite(String),
    #[error("`{key}` has {len} entries; expected {nodes} (one per node) or a single value")]
    Broadcast { key: String, len: usize, nodes: usize },
    #[error("`{key}` index {index} out of range (0..{len})")]
    IndexOutOfRange { key: String, index: usize, len: usize },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl DescriptorError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid { path: path.into(), message: message.into() }
    }
}

impl From<serde_yaml::Error> for DescriptorError {
    fn from(e: serde_yaml::Error) -> Self {
        let location = e.location().map(|l| (l.line(), l.column()));
        let mut message = e.to_string();
        if let Some((line, column)) = location {
            // serde_yaml appends the location itself; keep a single copy.
            let suffix = format!(" at line {line} column {column}");
            if let Some(stripped) = message.strip_suffix(&suffix) {
                message = stripped.to_string();
            }
        }
        Self::Parse { message, location }
    }
}

/// Unit of every curvature value in a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum KappaUnit {
    #[default]
    #[serde(rename = "rad/cm")]
    RadPerCm,
    #[serde(rename = "per_m")]
    PerMetre,
}

impl KappaUnit {
    pub fn to_rad_per_cm(self, kappa: f64) -> f64 {
        match self {
            KappaUnit::RadPerCm => kappa,
            KappaUnit::PerMetre => kappa / 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default)]
    pub kappa: KappaUnit,
}

/// A scalar broadcast to every node, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn broadcast(&self, key: &str, nodes: usize) -> Result<Vec<T>, DescriptorError> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); nodes]),
            OneOrMany::Many(v) if v.len() == 1 => Ok(vec![v[0].clone(); nodes]),
            OneOrMany::Many(v) if v.len() == nodes => Ok(v.clone()),
            OneOrMany::Many(v) => {
                Err(DescriptorError::Broadcast { key: key.into(), len: v.len(), nodes })
            }
        }
    }
}

/// Bending direction of a curvature term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BendDirection {
    #[serde(rename = "az-deg")]
    Azimuth(f64),
    #[serde(rename = "axis")]
    Axis([f64; 3]),
}

/// One `*-kappa-terms` entry, in the document's curvature unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaSpec {
    pub kappa: f64,
    pub direction: BendDirection,
    pub span: [f64; 2],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KappaSpecRepr {
    kappa: f64,
    #[serde(rename = "az-deg", default, skip_serializing_if = "Option::is_none")]
    az_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<[f64; 3]>,
    #[serde(default = "full_span")]
    span: [f64; 2],
}

fn full_span() -> [f64; 2] {
    [0.0, 1.0]
}

impl<'de> Deserialize<'de> for KappaSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = KappaSpecRepr::deserialize(d)?;
        let direction = match (r.az_deg, r.axis) {
            (Some(_), Some(_)) => {
                return Err(D::Error::custom("kappa term takes `az-deg` or `axis`, not both"))
            }
            (_, Some(a)) => BendDirection::Axis(a),
            (az, None) => BendDirection::Azimuth(az.unwrap_or(0.0)),
        };
        Ok(KappaSpec { kappa: r.kappa, direction, span: r.span })
    }
}

impl Serialize for KappaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let (az_deg, axis) = match self.direction {
            BendDirection::Azimuth(a) => (Some(a), None),
            BendDirection::Axis(a) => (None, Some(a)),
        };
        KappaSpecRepr { kappa: self.kappa, az_deg, axis, span: self.span }.serialize(s)
    }
}

impl KappaSpec {
    /// Curvature term in rad/cm. Azimuths are measured in the plane spanned by
    /// `normal` (0°) and `binormal` (90°), which for the main stem are +x, +y.
    pub fn to_term(
        &self,
        unit: KappaUnit,
        normal: &Vec3,
        binormal: &Vec3,
    ) -> Result<KappaTerm, crate::frame::FrameError> {
        let axis = match self.direction {
            BendDirection::Azimuth(deg) => {
                let a = azimuth_axis(deg);
                normal * a.x + binormal * a.y
            }
            BendDirection::Axis(a) => Vec3::new(a[0], a[1], a[2]),
        };
        KappaTerm::new(unit.to_rad_per_cm(self.kappa), axis, (self.span[0], self.span[1]))
    }
}

/// Declares a settings family twice: as `$opt` with every key optional (what
/// a document may write at any inheritance level) and as `$spec` with every
/// value resolved.
macro_rules! settings {
    (
        $(#[$meta:meta])*
        $opt:ident => $spec:ident {
            $( $(#[doc = $doc:literal])* $field:ident : $ty:ty = $key:literal, )*
        }
    ) => {
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields)]
        pub struct $opt {
            $(
                #[serde(rename = $key, default, skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $spec {
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl $opt {
            /// Values set here win over `base`.
            pub fn apply(&self, base: &$spec) -> $spec {
                $spec { $( $field: self.$field.clone().unwrap_or_else(|| base.$field.clone()), )* }
            }

            /// Every key written out.
            pub fn explicit(spec: &$spec) -> Self {
                Self { $( $field: Some(spec.$field.clone()), )* }
            }

            pub fn is_empty(&self) -> bool {
                true $( && self.$field.is_none() )*
            }
        }
    };
}

settings! {
    /// Fully resolved blade or leaflet settings in document units (degrees, cm).
    LeafSettings => LeafSpec {
        /// Control rows along the blade.
        ctrl_u: usize = "ctrl_u",
        /// Control columns across the blade (odd).
        ctrl_v: usize = "ctrl_v",
        length: f64 = "length",
        width: f64 = "width",
        width_pow: f64 = "width_pow",
        alpha: f64 = "alpha",
        beta: f64 = "beta",
        apex: f64 = "apex",
        base: f64 = "base",
        skew: f64 = "skew",
        bend: f64 = "bend",
        camber: f64 = "camber",
        camber_pow: f64 = "camber_pow",
        twist_deg: f64 = "twist_deg",
        fold_deg: f64 = "fold_deg",
        fold_pow: f64 = "fold_pow",
        fold_env: f64 = "fold_env",
        midrib_offset: f64 = "midrib_offset",
        width_bias_left: f64 = "width_bias_left",
        width_bias_right: f64 = "width_bias_right",
        /// Extra orientation relative to the attachment frame.
        yaw_deg: f64 = "yaw_deg",
        pitch_deg: f64 = "pitch_deg",
        roll_deg: f64 = "roll_deg",
        graft_rows: usize = "graft_rows",
        graft_dz: f64 = "graft_dz",
        graft_arc_deg: f64 = "graft_arc_deg",
        graft_dr: f64 = "graft_dr",
        /// Soft-blend extent in u; 0 disables blending.
        blend_u: f64 = "blend_u",
        hinges: Vec<HingeSpec> = "leaf-bend-hinges",
        enabled: bool = "enabled",
    }
}

settings! {
    /// Fully resolved petiole or petiolule settings.
    BranchSettings => BranchSpec {
        length: f64 = "length",
        diameter_mm: f64 = "diameter-mm",
        kappa: f64 = "kappa",
        bend_az_deg: f64 = "bend-az-deg",
        /// Replaces `kappa`/`bend-az-deg` when non-empty.
        kappa_terms: Vec<KappaSpec> = "kappa-terms",
        /// Default yaw magnitude of the lateral petiolules.
        lateral_yaw_deg: f64 = "lateral-yaw-deg",
        /// Orientation offsets added to the defaults for this branch.
        yaw_deg: f64 = "yaw-deg",
        pitch_deg: f64 = "pitch-deg",
        roll_deg: f64 = "roll-deg",
    }
}

impl LeafSpec {
    pub fn params(&self) -> LeafParams {
        LeafParams {
            length: self.length,
            width: self.width,
            taper_pow: self.width_pow,
            alpha: self.alpha,
            beta: self.beta,
            apex: self.apex,
            base: self.base,
            skew: self.skew,
            bend: self.bend,
            camber: self.camber,
            camber_pow: self.camber_pow,
            twist: self.twist_deg.to_radians(),
            fold: self.fold_deg.to_radians(),
            fold_pow: self.fold_pow,
            fold_env: self.fold_env,
            midrib_offset: self.midrib_offset,
            width_bias_left: self.width_bias_left,
            width_bias_right: self.width_bias_right,
        }
    }

    pub fn defaults(family: Family) -> Self {
        let (length, width, pitch) = match family {
            Family::Monocot => (60.0, 8.0, 0.0),
            Family::Dicot => (8.0, 5.0, 0.0),
        };
        LeafSpec {
            ctrl_u: 9,
            ctrl_v: 5,
            length,
            width,
            width_pow: 1.2,
            alpha: 1.0,
            beta: 1.5,
            apex: 0.0,
            base: 0.0,
            skew: 0.0,
            bend: 0.0,
            camber: 0.0,
            camber_pow: 1.4,
            twist_deg: 0.0,
            fold_deg: 0.0,
            fold_pow: 1.0,
            fold_env: 1.0,
            midrib_offset: 0.0,
            width_bias_left: 1.0,
            width_bias_right: 1.0,
            yaw_deg: 0.0,
            pitch_deg: pitch,
            roll_deg: 0.0,
            graft_rows: 2,
            graft_dz: 2.0,
            graft_arc_deg: 90.0,
            graft_dr: 0.05,
            blend_u: 0.0,
            hinges: Vec::new(),
            enabled: true,
        }
    }

    fn validate(&self, family: Family, path: &str) -> Result<(), DescriptorError> {
        let fail = |m: String| DescriptorError::invalid(path, m);
        if self.ctrl_u < 4 {
            return Err(fail(format!("ctrl_u = {} must be >= 4", self.ctrl_u)));
        }
        if self.ctrl_v < 3 || self.ctrl_v.is_multiple_of(2) {
            return Err(fail(format!("ctrl_v = {} must be odd and >= 3", self.ctrl_v)));
        }
        self.params().validate(family).map_err(|e| fail(e.to_string()))?;
        for (k, h) in self.hinges.iter().enumerate() {
            h.validate().map_err(|e| fail(format!("leaf-bend-hinges[{k}]: {e}")))?;
        }
        if family == Family::Monocot {
            if self.graft_rows < 2 || self.graft_rows >= self.ctrl_u {
                return Err(fail(format!(
                    "graft_rows = {} must be >= 2 and < ctrl_u = {}",
                    self.graft_rows, self.ctrl_u
                )));
            }
            if !(self.graft_dz > 0.0) {
                return Err(fail(format!("graft_dz = {} must be > 0", self.graft_dz)));
            }
            if !(0.0..=1.0).contains(&self.blend_u) {
                return Err(fail(format!("blend_u = {} must be in [0, 1]", self.blend_u)));
            }
        }
        Ok(())
    }
}

impl BranchSpec {
    pub fn petiole_defaults() -> Self {
        BranchSpec {
            length: 10.0,
            diameter_mm: 2.0,
            kappa: 0.0,
            bend_az_deg: 0.0,
            kappa_terms: Vec::new(),
            lateral_yaw_deg: 45.0,
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
        }
    }

    pub fn petiolule_defaults() -> Self {
        BranchSpec { length: 1.0, diameter_mm: 1.5, ..Self::petiole_defaults() }
    }

    /// Curvature terms over the whole branch.
    pub fn curvature(&self) -> Vec<KappaSpec> {
        if self.kappa_terms.is_empty() {
            vec![KappaSpec {
                kappa: self.kappa,
                direction: BendDirection::Azimuth(self.bend_az_deg),
                span: full_span(),
            }]
        } else {
            self.kappa_terms.clone()
        }
    }

    fn validate(&self, path: &str) -> Result<(), DescriptorError> {
        if !(self.length > 0.0) {
            return Err(DescriptorError::invalid(path, format!("length = {} must be > 0", self.length)));
        }
        if !(self.diameter_mm > 0.0) {
            return Err(DescriptorError::invalid(
                path,
                format!("diameter-mm = {} must be > 0", self.diameter_mm),
            ));
        }
        validate_terms(&self.curvature(), path)
    }
}

fn validate_terms(terms: &[KappaSpec], path: &str) -> Result<(), DescriptorError> {
    for (k, t) in terms.iter().enumerate() {
        t.to_term(KappaUnit::RadPerCm, &Vec3::x(), &Vec3::y())
            .map_err(|e| DescriptorError::invalid(format!("{path}.kappa-terms[{k}]"), e.to_string()))?;
    }
    Ok(())
}

/// Overrides for one side (terminal, left, right) of a trifoliate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petiolule: Option<BranchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaflet: Option<LeafSettings>,
}

/// Per-organ overrides for one petiole and its trifoliate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PetioleOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petiole: Option<BranchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<SideOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<SideOverride>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<SideOverride>,
}

/// Per-node overrides. Leaf keys sit directly under the node index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeOverride {
    pub leaf: LeafSettings,
    pub stalk_kappa_terms: Option<Vec<KappaSpec>>,
    pub petiole: Option<BranchSettings>,
    pub petiolule: Option<BranchSettings>,
    pub petioles: Option<BTreeMap<usize, PetioleOverride>>,
}

const NODE_KEYS: [&str; 4] = ["stalk-kappa-terms", "petiole", "petiolule", "petioles"];

impl<'de> Deserialize<'de> for NodeOverride {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let mut map = serde_yaml::Mapping::deserialize(d)?;
        fn take<T: for<'a> Deserialize<'a>, E: serde::de::Error>(
            map: &mut serde_yaml::Mapping,
            key: &str,
        ) -> Result<Option<T>, E> {
            map.remove(key)
                .map(|v| serde_yaml::from_value(v).map_err(|e| E::custom(format!("{key}: {e}"))))
                .transpose()
        }
        let stalk_kappa_terms = take(&mut map, NODE_KEYS[0])?;
        let petiole = take(&mut map, NODE_KEYS[1])?;
        let petiolule = take(&mut map, NODE_KEYS[2])?;
        let petioles = take(&mut map, NODE_KEYS[3])?;
        let leaf = serde_yaml::from_value(serde_yaml::Value::Mapping(map)).map_err(D::Error::custom)?;
        Ok(Self { leaf, stalk_kappa_terms, petiole, petiolule, petioles })
    }
}

impl Serialize for NodeOverride {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let mut map = match serde_yaml::to_value(&self.leaf).map_err(S::Error::custom)? {
            serde_yaml::Value::Mapping(m) => m,
            _ => serde_yaml::Mapping::new(),
        };
        let mut put = |key: &str, v: Result<serde_yaml::Value, serde_yaml::Error>| -> Result<(), S::Error> {
            map.insert(key.into(), v.map_err(S::Error::custom)?);
            Ok(())
        };
        if let Some(t) = &self.stalk_kappa_terms {
            put(NODE_KEYS[0], serde_yaml::to_value(t))?;
        }
        if let Some(p) = &self.petiole {
            put(NODE_KEYS[1], serde_yaml::to_value(p))?;
        }
        if let Some(p) = &self.petiolule {
            put(NODE_KEYS[2], serde_yaml::to_value(p))?;
        }
        if let Some(p) = &self.petioles {
            put(NODE_KEYS[3], serde_yaml::to_value(p))?;
        }
        map.serialize(s)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeavesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub globals: Option<LeafSettings>,
}

/// A descriptor document as written, before inheritance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDescriptor {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outfile: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(rename = "node-z", default, skip_serializing_if = "Option::is_none")]
    pub node_z: Option<Vec<f64>>,
    #[serde(rename = "stem-diameter-mm", default, skip_serializing_if = "Option::is_none")]
    pub stem_diameter_mm: Option<OneOrMany<f64>>,
    #[serde(rename = "stalk-kappa", default, skip_serializing_if = "Option::is_none")]
    pub stalk_kappa: Option<OneOrMany<f64>>,
    #[serde(rename = "stalk-bend-az-deg", default, skip_serializing_if = "Option::is_none")]
    pub stalk_bend_az_deg: Option<OneOrMany<f64>>,
    #[serde(rename = "leaf-nodes", default, skip_serializing_if = "Option::is_none")]
    pub leaf_nodes: Option<Vec<usize>>,
    #[serde(rename = "leaf-az-deg", default, skip_serializing_if = "Option::is_none")]
    pub leaf_az_deg: Option<OneOrMany<f64>>,
    #[serde(rename = "leaf-pitch-deg", default, skip_serializing_if = "Option::is_none")]
    pub leaf_pitch_deg: Option<OneOrMany<f64>>,
    #[serde(rename = "leaf-roll-deg", default, skip_serializing_if = "Option::is_none")]
    pub leaf_roll_deg: Option<OneOrMany<f64>>,
    #[serde(rename = "apical-extension", default, skip_serializing_if = "Option::is_none")]
    pub apical_extension: Option<f64>,
    #[serde(rename = "n-seg", default, skip_serializing_if = "Option::is_none")]
    pub n_seg: Option<usize>,
    #[serde(rename = "ring-samples", default, skip_serializing_if = "Option::is_none")]
    pub ring_samples: Option<usize>,
    #[serde(rename = "petioles-per-node", default, skip_serializing_if = "Option::is_none")]
    pub petioles_per_node: Option<OneOrMany<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaves: Option<LeavesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petiole: Option<BranchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub petiolule: Option<BranchSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<BTreeMap<usize, NodeOverride>>,
}

impl RawDescriptor {
    pub fn to_yaml(&self) -> Result<String, DescriptorError> {
        Ok(serde_yaml::to_string(self)?)
    }
}

const REQUIRED_KEYS: [&str; 1] = ["node-z"];

/// Parse a descriptor document. Unknown keys, non-finite numbers and missing
/// required keys are errors.
pub fn parse_descriptor(text: &str) -> Result<RawDescriptor, DescriptorError> {
    let value: serde_yaml::Value = serde_yaml::from_str(text)?;
    if value.is_null() {
        return Err(DescriptorError::MissingKeys(REQUIRED_KEYS.iter().map(|k| k.to_string()).collect()));
    }
    check_finite(&value, "")?;
    let raw: RawDescriptor = serde_yaml::from_str(text)?;
    if raw.node_z.is_none() {
        return Err(DescriptorError::MissingKeys(vec!["node-z".into()]));
    }
    Ok(raw)
}

fn check_finite(value: &serde_yaml::Value, path: &str) -> Result<(), DescriptorError> {
    use serde_yaml::Value;
    match value {
        Value::Number(n) => match n.as_f64() {
            Some(f) if !f.is_finite() => Err(DescriptorError::NonFinite(path.to_string())),
            _ => Ok(()),
        },
        Value::Sequence(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(k, v)| check_finite(v, &format!("{path}[{k}]"))),
        Value::Mapping(m) => m.iter().try_for_each(|(k, v)| {
            let key = match k {
                Value::String(s) => s.clone(),
                other => serde_yaml::to_string(other).unwrap_or_default().trim().to_string(),
            };
            let p = if path.is_empty() { key } else { format!("{path}.{key}") };
            check_finite(v, &p)
        }),
        Value::Tagged(t) => check_finite(&t.value, path),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Terminal,
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 3] = [Side::Terminal, Side::Left, Side::Right];

    pub fn tag(self) -> &'static str {
        match self {
            Side::Terminal => "T",
            Side::Left => "L",
            Side::Right => "R",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Side::Terminal => "terminal",
            Side::Left => "left",
            Side::Right => "right",
        }
    }

    /// Default yaw sign for a lateral petiolule.
    pub fn yaw_sign(self) -> f64 {
        match self {
            Side::Terminal => 0.0,
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideSpec {
    pub side: Side,
    pub petiolule: BranchSpec,
    pub leaflet: LeafSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PetioleSpec {
    pub petiole: BranchSpec,
    pub sides: Vec<SideSpec>,
}

/// Everything needed to build one node after inheritance.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub z: f64,
    pub diameter_mm: f64,
    /// Single-axis curvature of the internode ending at this node.
    pub kappa: f64,
    pub bend_az_deg: f64,
    /// Multi-axis terms replacing `kappa`/`bend_az_deg` when present.
    pub kappa_terms: Option<Vec<KappaSpec>>,
    pub bears_leaf: bool,
    pub azimuth_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    /// Monocot blade, or the node-level leaflet defaults for dicots.
    pub leaf: LeafSpec,
    /// Dicot compound leaves (empty for monocots and leafless nodes).
    pub petioles: Vec<PetioleSpec>,
    pub petiole: BranchSpec,
    pub petiolule: BranchSpec,
}

impl NodeSpec {
    pub fn internode_curvature(&self) -> Vec<KappaSpec> {
        match &self.kappa_terms {
            Some(terms) => terms.clone(),
            None => vec![KappaSpec {
                kappa: self.kappa,
                direction: BendDirection::Azimuth(self.bend_az_deg),
                span: full_span(),
            }],
        }
    }
}

/// Fully resolved descriptor.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantDescriptor {
    pub family: Family,
    pub kappa_unit: KappaUnit,
    pub seed: u64,
    pub outfile: Option<String>,
    /// Straight culm extension above the last node (cm); zero for dicots.
    pub apical_extension: f64,
    pub n_seg: usize,
    pub ring_samples: usize,
    pub leaf_globals: LeafSpec,
    pub petiole_globals: BranchSpec,
    pub petiolule_globals: BranchSpec,
    pub nodes: Vec<NodeSpec>,
}

pub const DEFAULT_SEED: u64 = 2025;

/// Apply inheritance and broadcasting, validating every resolved value.
pub fn resolve_parameters(raw: &RawDescriptor) -> Result<PlantDescriptor, DescriptorError> {
    let family = raw.family.unwrap_or_default();
    let node_z = raw
        .node_z
        .clone()
        .ok_or_else(|| DescriptorError::MissingKeys(vec!["node-z".into()]))?;
    let n = node_z.len();
    if n == 0 {
        return Err(DescriptorError::invalid("node-z", "at least one node is required"));
    }
    if !(node_z[0] > 0.0) {
        return Err(DescriptorError::invalid("node-z", format!("first node height {} must be > 0", node_z[0])));
    }
    if let Some(k) = node_z.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(DescriptorError::invalid(
            "node-z",
            format!("heights must be strictly increasing ({} then {})", node_z[k], node_z[k + 1]),
        ));
    }

    let list = |key: &str, v: &Option<OneOrMany<f64>>, default: &dyn Fn(usize) -> f64| {
        match v {
            Some(v) => v.broadcast(key, n),
            None => Ok((0..n).map(default).collect()),
        }
    };
    let default_diameter = match family {
        Family::Monocot => 20.0,
        Family::Dicot => 5.0,
    };
    let diameters = list("stem-diameter-mm", &raw.stem_diameter_mm, &|_| default_diameter)?;
    if let Some(k) = diameters.iter().position(|d| !(*d > 0.0)) {
        return Err(DescriptorError::invalid(
            format!("stem-diameter-mm[{k}]"),
            format!("diameter {} must be > 0", diameters[k]),
        ));
    }
    let kappas = list("stalk-kappa", &raw.stalk_kappa, &|_| 0.0)?;
    let bend_az = list("stalk-bend-az-deg", &raw.stalk_bend_az_deg, &|_| 0.0)?;

    let leaf_nodes: Vec<usize> = match &raw.leaf_nodes {
        Some(idx) => {
            let mut sorted = idx.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != idx.len() {
                return Err(DescriptorError::invalid("leaf-nodes", "duplicate node index"));
            }
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(DescriptorError::IndexOutOfRange { key: "leaf-nodes".into(), index: bad, len: n });
            }
            sorted
        }
        None => (0..n).collect(),
    };
    let angles = |key: &str, v: &Option<OneOrMany<f64>>, default: &dyn Fn(usize) -> f64| {
        match v {
            Some(OneOrMany::Many(items)) if items.is_empty() && leaf_nodes.is_empty() => {
                Ok((0..n).map(default).collect())
            }
            other => list(key, other, default),
        }
    };
    let default_pitch = match family {
        Family::Monocot => 30.0,
        Family::Dicot => 45.0,
    };
    let leaf_az = angles("leaf-az-deg", &raw.leaf_az_deg, &|k| if k % 2 == 0 { 0.0 } else { 180.0 })?;
    let leaf_pitch = angles("leaf-pitch-deg", &raw.leaf_pitch_deg, &|_| default_pitch)?;
    let leaf_roll = angles("leaf-roll-deg", &raw.leaf_roll_deg, &|_| 0.0)?;

    let petiole_counts: Vec<usize> = match &raw.petioles_per_node {
        Some(v) => v.broadcast("petioles-per-node", n)?,
        None => vec![1; n],
    };

    let leaf_globals = raw
        .leaves
        .as_ref()
        .and_then(|l| l.globals.as_ref())
        .map_or_else(|| LeafSpec::defaults(family), |g| g.apply(&LeafSpec::defaults(family)));
    let petiole_globals = raw
        .petiole
        .as_ref()
        .map_or_else(BranchSpec::petiole_defaults, |p| p.apply(&BranchSpec::petiole_defaults()));
    let petiolule_globals = raw
        .petiolule
        .as_ref()
        .map_or_else(BranchSpec::petiolule_defaults, |p| p.apply(&BranchSpec::petiolule_defaults()));

    let empty = BTreeMap::new();
    let overrides = raw.nodes.as_ref().unwrap_or(&empty);
    if let Some((&bad, _)) = overrides.iter().find(|(&k, _)| k >= n) {
        return Err(DescriptorError::IndexOutOfRange { key: "nodes".into(), index: bad, len: n });
    }

    let mut nodes = Vec::with_capacity(n);
    for k in 0..n {
        let path = format!("nodes.{k}");
        let over = overrides.get(&k);
        let leaf = over.map_or_else(|| leaf_globals.clone(), |o| o.leaf.apply(&leaf_globals));
        let petiole = over
            .and_then(|o| o.petiole.as_ref())
            .map_or_else(|| petiole_globals.clone(), |p| p.apply(&petiole_globals));
        let petiolule = over
            .and_then(|o| o.petiolule.as_ref())
            .map_or_else(|| petiolule_globals.clone(), |p| p.apply(&petiolule_globals));
        let kappa_terms = over.and_then(|o| o.stalk_kappa_terms.clone());
        if let Some(terms) = &kappa_terms {
            validate_terms(terms, &format!("{path}.stalk"))?;
        }
        let bears_leaf = leaf_nodes.binary_search(&k).is_ok();

        let mut petioles = Vec::new();
        let organ_overrides = over.and_then(|o| o.petioles.as_ref());
        if family == Family::Dicot && bears_leaf {
            if let Some((&bad, _)) = organ_overrides.and_then(|m| m.iter().find(|(&p, _)| p >= petiole_counts[k])) {
                return Err(DescriptorError::IndexOutOfRange {
                    key: format!("{path}.petioles"),
                    index: bad,
                    len: petiole_counts[k],
                });
            }
            for p in 0..petiole_counts[k] {
                let organ = organ_overrides.and_then(|m| m.get(&p));
                let this_petiole = organ
                    .and_then(|o| o.petiole.as_ref())
                    .map_or_else(|| petiole.clone(), |s| s.apply(&petiole));
                this_petiole.validate(&format!("{path}.petioles.{p}.petiole"))?;
                let sides = Side::ALL
                    .iter()
                    .map(|&side| {
                        let so = organ.and_then(|o| match side {
                            Side::Terminal => o.terminal.as_ref(),
                            Side::Left => o.left.as_ref(),
                            Side::Right => o.right.as_ref(),
                        });
                        let side_path = format!("{path}.petioles.{p}.{}", side.key());
                        let petiolule = so
                            .and_then(|s| s.petiolule.as_ref())
                            .map_or_else(|| petiolule.clone(), |s| s.apply(&petiolule));
                        petiolule.validate(&format!("{side_path}.petiolule"))?;
                        let leaflet = so
                            .and_then(|s| s.leaflet.as_ref())
                            .map_or_else(|| leaf.clone(), |s| s.apply(&leaf));
                        leaflet.validate(family, &format!("{side_path}.leaflet"))?;
                        Ok(SideSpec { side, petiolule, leaflet })
                    })
                    .collect::<Result<Vec<_>, DescriptorError>>()?;
                petioles.push(PetioleSpec { petiole: this_petiole, sides });
            }
        } else if bears_leaf {
            leaf.validate(family, &path)?;
        }

        nodes.push(NodeSpec {
            z: node_z[k],
            diameter_mm: diameters[k],
            kappa: kappas[k],
            bend_az_deg: bend_az[k],
            kappa_terms,
            bears_leaf,
            azimuth_deg: leaf_az[k],
            pitch_deg: leaf_pitch[k],
            roll_deg: leaf_roll[k],
            leaf,
            petioles,
            petiole,
            petiolule,
        });
    }
    validate_terms(
        &nodes.iter().flat_map(NodeSpec::internode_curvature).collect::<Vec<_>>(),
        "stalk",
    )?;

    let n_seg = raw.n_seg.unwrap_or(64);
    if n_seg == 0 {
        return Err(DescriptorError::invalid("n-seg", "must be >= 1"));
    }
    let ring_samples = raw.ring_samples.unwrap_or(8);
    if ring_samples < 4 {
        return Err(DescriptorError::invalid("ring-samples", "must be >= 4"));
    }
    let apical_extension = raw.apical_extension.unwrap_or(match family {
        Family::Monocot => 5.0,
        Family::Dicot => 0.0,
    });
    if !(apical_extension >= 0.0) {
        return Err(DescriptorError::invalid("apical-extension", "must be >= 0"));
    }

    Ok(PlantDescriptor {
        family,
        kappa_unit: raw.units.map(|u| u.kappa).unwrap_or_default(),
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        outfile: raw.outfile.clone(),
        apical_extension,
        n_seg,
        ring_samples,
        leaf_globals,
        petiole_globals,
        petiolule_globals,
        nodes,
    })
}

impl PlantDescriptor {
    /// A document stating every resolved value explicitly; resolving it
    /// reproduces `self`.
    pub fn to_raw(&self) -> RawDescriptor {
        let per_node = |f: &dyn Fn(&NodeSpec) -> f64| Some(OneOrMany::Many(self.nodes.iter().map(f).collect()));
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(k, node)| {
                let petioles = (!node.petioles.is_empty()).then(|| {
                    node.petioles
                        .iter()
                        .enumerate()
                        .map(|(p, spec)| {
                            let side = |s: Side| {
                                spec.sides.iter().find(|x| x.side == s).map(|x| SideOverride {
                                    petiolule: Some(BranchSettings::explicit(&x.petiolule)),
                                    leaflet: Some(LeafSettings::explicit(&x.leaflet)),
                                })
                            };
                            (
                                p,
                                PetioleOverride {
                                    petiole: Some(BranchSettings::explicit(&spec.petiole)),
                                    terminal: side(Side::Terminal),
                                    left: side(Side::Left),
                                    right: side(Side::Right),
                                },
                            )
                        })
                        .collect()
                });
                let over = NodeOverride {
                    leaf: LeafSettings::explicit(&node.leaf),
                    stalk_kappa_terms: node.kappa_terms.clone(),
                    petiole: Some(BranchSettings::explicit(&node.petiole)),
                    petiolule: Some(BranchSettings::explicit(&node.petiolule)),
                    petioles,
                };
                (k, over)
            })
            .collect();
        RawDescriptor {
            family: Some(self.family),
            units: Some(Units { kappa: self.kappa_unit }),
            outfile: self.outfile.clone(),
            seed: Some(self.seed),
            node_z: Some(self.nodes.iter().map(|n| n.z).collect()),
            stem_diameter_mm: per_node(&|n| n.diameter_mm),
            stalk_kappa: per_node(&|n| n.kappa),
            stalk_bend_az_deg: per_node(&|n| n.bend_az_deg),
            leaf_nodes: Some(
                self.nodes.iter().enumerate().filter(|(_, n)| n.bears_leaf).map(|(k, _)| k).collect(),
            ),
            leaf_az_deg: per_node(&|n| n.azimuth_deg),
            leaf_pitch_deg: per_node(&|n| n.pitch_deg),
            leaf_roll_deg: per_node(&|n| n.roll_deg),
            apical_extension: Some(self.apical_extension),
            n_seg: Some(self.n_seg),
            ring_samples: Some(self.ring_samples),
            petioles_per_node: Some(OneOrMany::Many(
                self.nodes
                    .iter()
                    .map(|n| if n.bears_leaf && self.family == Family::Dicot { n.petioles.len() } else { 1 })
                    .collect(),
            )),
            leaves: Some(LeavesSection { globals: Some(LeafSettings::explicit(&self.leaf_globals)) }),
            petiole: Some(BranchSettings::explicit(&self.petiole_globals)),
            petiolule: Some(BranchSettings::explicit(&self.petiolule_globals)),
            nodes: Some(nodes),
        }
    }

    /// Number of leaf-bearing nodes.
    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.bears_leaf).count()
    }
}

/// Deterministic starting descriptor from node heights and a leaf count:
/// default diameters, straight stem, 0°/180° alternating azimuths and no
/// hinges. Leaves go on the uppermost `leaf_count` nodes.
pub fn seed_template(
    node_z: &[f64],
    leaf_count: usize,
    family: Family,
) -> Result<RawDescriptor, DescriptorError> {
    if leaf_count > node_z.len() {
        return Err(DescriptorError::invalid(
            "leaf-count",
            format!("{leaf_count} leaves requested for {} nodes", node_z.len()),
        ));
    }
    let n = node_z.len();
    let leaf_nodes: Vec<usize> = (n - leaf_count..n).collect();
    let per_leaf = |f: &dyn Fn(usize) -> f64| {
        if leaf_count == 0 {
            OneOrMany::Many(Vec::new())
        } else {
            OneOrMany::Many((0..n).map(f).collect())
        }
    };
    let pitch = match family {
        Family::Monocot => 30.0,
        Family::Dicot => 45.0,
    };
    let diameter = match family {
        Family::Monocot => 20.0,
        Family::Dicot => 5.0,
    };
    let globals = LeafSpec::defaults(family);
    let raw = RawDescriptor {
        family: Some(family),
        units: Some(Units::default()),
        outfile: Some(format!("out/{}_template.stl", family.as_str())),
        seed: Some(DEFAULT_SEED),
        node_z: Some(node_z.to_vec()),
        stem_diameter_mm: Some(OneOrMany::Many(vec![diameter; n])),
        stalk_kappa: Some(OneOrMany::Many(vec![0.0; n])),
        stalk_bend_az_deg: Some(OneOrMany::Many(vec![0.0; n])),
        leaf_nodes: Some(leaf_nodes),
        leaf_az_deg: Some(per_leaf(&|k| if k % 2 == 0 { 0.0 } else { 180.0 })),
        leaf_pitch_deg: Some(per_leaf(&|_| pitch)),
        leaf_roll_deg: None,
        apical_extension: None,
        n_seg: None,
        ring_samples: None,
        petioles_per_node: None,
        leaves: Some(LeavesSection {
            globals: Some(LeafSettings {
                ctrl_u: Some(globals.ctrl_u),
                ctrl_v: Some(globals.ctrl_v),
                length: Some(globals.length),
                width: Some(globals.width),
                camber: Some(globals.camber),
                camber_pow: Some(globals.camber_pow),
                width_pow: (family == Family::Monocot).then_some(globals.width_pow),
                ..LeafSettings::default()
            }),
        }),
        petiole: None,
        petiolule: None,
        nodes: None,
    };
    Ok(raw)
}

/// Soft range checks against values seen in fitted plants; never fatal.
pub fn lint(pd: &PlantDescriptor) -> Vec<String> {
    let mut warnings = Vec::new();
    let kappa_max = 0.1;
    for (k, node) in pd.nodes.iter().enumerate() {
        if node.bears_leaf && !(0.0..=90.0).contains(&node.pitch_deg) {
            warnings.push(format!("node {k}: leaf pitch {}° outside [0°, 90°]", node.pitch_deg));
        }
        if node.diameter_mm > 70.0 {
            warnings.push(format!("node {k}: stem diameter {} mm above 70 mm", node.diameter_mm));
        }
        for t in node.internode_curvature() {
            let kappa = pd.kappa_unit.to_rad_per_cm(t.kappa);
            if kappa > kappa_max {
                warnings.push(format!(
                    "node {k}: curvature {kappa} rad/cm gives a bending radius under 10 cm"
                ));
            }
        }
        if !node.bears_leaf {
            continue;
        }
        let leaves: Vec<(&str, &LeafSpec)> = if pd.family == Family::Monocot {
            vec![("leaf", &node.leaf)]
        } else {
            node.petioles
                .iter()
                .flat_map(|p| p.sides.iter().map(|s| (s.side.tag(), &s.leaflet)))
                .collect()
        };
        for (tag, leaf) in leaves {
            if !(4.5..=102.0).contains(&leaf.length) {
                warnings.push(format!("node {k} {tag}: leaf length {} cm outside [4.5, 102]", leaf.length));
            }
            if leaf.hinges.len() > 5 {
                warnings.push(format!("node {k} {tag}: {} hinges (more than 5)", leaf.hinges.len()));
            }
            if leaf.fold_deg.abs() > 20.0 {
                warnings.push(format!("node {k} {tag}: V-fold {}° beyond 20°", leaf.fold_deg));
            }
            if pd.family == Family::Monocot && leaf.bend < 0.0 {
                warnings.push(format!("node {k}: negative bend droops a monocot blade"));
            }
            if pd.family == Family::Dicot && leaf.bend > 0.0 {
                warnings.push(format!("node {k} {tag}: positive bend arches a dicot leaflet upward"));
            }
        }
        for p in &node.petioles {
            if !(3.0..=20.5).contains(&p.petiole.length) {
                warnings.push(format!("node {k}: petiole length {} cm outside [3, 20.5]", p.petiole.length));
            }
        }
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "node-z: [10, 20, 30]\n";

    #[test]
    fn empty_document_lists_required_keys() {
        match parse_descriptor("") {
            Err(DescriptorError::MissingKeys(keys)) => assert_eq!(keys, vec!["node-z"]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_descriptor("# nothing\n"), Err(DescriptorError::MissingKeys(_))));
        assert!(matches!(parse_descriptor("seed: 3\n"), Err(DescriptorError::MissingKeys(_))));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_descriptor("node-z: [1, 2]\nnode-zz: 3\n").unwrap_err();
        assert!(err.to_string().contains("node-zz"), "{err}");
        let err = parse_descriptor("node-z: [1, 2]\nnodes:\n  1:\n    lenght: 3\n").unwrap_err();
        assert!(err.to_string().contains("lenght"), "{err}");
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_descriptor("node-z: [1, 2\nseed: 1\n") {
            Err(DescriptorError::Parse { location: Some((line, _)), .. }) => assert!(line >= 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_rejected() {
        assert!(matches!(parse_descriptor("node-z: hello\n"), Err(DescriptorError::Parse { .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let err = parse_descriptor("node-z: [1, .nan]\n").unwrap_err();
        assert_eq!(err, DescriptorError::NonFinite("node-z[1]".into()));
    }

    #[test]
    fn scalar_broadcast() {
        let raw = parse_descriptor("node-z: [10, 20, 30]\nstalk-kappa: 0.0\nstem-diameter-mm: 12\n").unwrap();
        let pd = resolve_parameters(&raw).unwrap();
        assert!(pd.nodes.iter().all(|n| n.kappa == 0.0 && n.diameter_mm == 12.0));
    }

    #[test]
    fn broadcast_length_error_names_key() {
        let raw = parse_descriptor("node-z: [10, 20, 30]\nstalk-kappa: [0.1, 0.2]\n").unwrap();
        assert_eq!(
            resolve_parameters(&raw).unwrap_err(),
            DescriptorError::Broadcast { key: "stalk-kappa".into(), len: 2, nodes: 3 }
        );
    }

    #[test]
    fn override_index_out_of_range() {
        let raw = parse_descriptor("node-z: [10, 20]\nnodes:\n  2:\n    length: 5\n").unwrap();
        assert!(matches!(resolve_parameters(&raw), Err(DescriptorError::IndexOutOfRange { index: 2, .. })));
    }

    #[test]
    fn heights_must_increase() {
        let raw = parse_descriptor("node-z: [10, 10]\n").unwrap();
        assert!(matches!(resolve_parameters(&raw), Err(DescriptorError::Invalid { .. })));
    }

    #[test]
    fn curvature_units() {
        let raw = parse_descriptor("node-z: [10]\nunits: {kappa: per_m}\nstalk-kappa: 0.5\n").unwrap();
        let pd = resolve_parameters(&raw).unwrap();
        assert_eq!(pd.kappa_unit, KappaUnit::PerMetre);
        assert!((pd.kappa_unit.to_rad_per_cm(pd.nodes[0].kappa) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn kappa_terms_parse() {
        let doc = "node-z: [10, 20]\nnodes:\n  1:\n    stalk-kappa-terms:\n      - {kappa: 0.01, az-deg: 90, span: [0, 0.5]}\n      - {kappa: 0.02, axis: [1, 0, 0]}\n";
        let pd = resolve_parameters(&parse_descriptor(doc).unwrap()).unwrap();
        let terms = pd.nodes[1].internode_curvature();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms[0].direction, BendDirection::Azimuth(90.0));
        assert_eq!(terms[1].span, [0.0, 1.0]);
        let bad = "node-z: [10]\nnodes:\n  0:\n    stalk-kappa-terms:\n      - {kappa: 0.01, az-deg: 9, axis: [1, 0, 0]}\n";
        assert!(parse_descriptor(bad).is_err());
    }

    #[test]
    fn leaf_nodes_control_bearing() {
        let raw = parse_descriptor("node-z: [10, 20, 30]\nleaf-nodes: [2]\n").unwrap();
        let pd = resolve_parameters(&raw).unwrap();
        assert_eq!(pd.leaf_count(), 1);
        assert!(pd.nodes[2].bears_leaf && !pd.nodes[0].bears_leaf);
        let raw = parse_descriptor("node-z: [10, 20, 30]\nleaf-nodes: [3]\n").unwrap();
        assert!(resolve_parameters(&raw).is_err());
    }

    #[test]
    fn seed_template_alternates_and_is_deterministic() {
        let z: Vec<f64> = (1..=10).map(|k| 10.0 * k as f64).collect();
        let raw = seed_template(&z, 10, Family::Monocot).unwrap();
        assert_eq!(
            raw.leaf_az_deg,
            Some(OneOrMany::Many(vec![0., 180., 0., 180., 0., 180., 0., 180., 0., 180.]))
        );
        let a = raw.to_yaml().unwrap();
        let b = seed_template(&z, 10, Family::Monocot).unwrap().to_yaml().unwrap();
        assert_eq!(a, b);
        assert!(seed_template(&z, 11, Family::Monocot).is_err());
    }

    #[test]
    fn seed_template_without_leaves_is_valid() {
        let raw = seed_template(&[10.0, 20.0], 0, Family::Monocot).unwrap();
        let text = raw.to_yaml().unwrap();
        let pd = resolve_parameters(&parse_descriptor(&text).unwrap()).unwrap();
        assert_eq!(pd.leaf_count(), 0);
    }

    #[test]
    fn lint_flags_pitch_out_of_range() {
        let raw = parse_descriptor("node-z: [10, 20]\nleaf-pitch-deg: [10, 120]\n").unwrap();
        let pd = resolve_parameters(&raw).unwrap();
        let w = lint(&pd);
        assert_eq!(w.len(), 1, "{w:?}");
        assert!(w[0].contains("node 1"));
    }

    #[test]
    fn minimal_document_resolves_with_defaults() {
        let pd = resolve_parameters(&parse_descriptor(MINIMAL).unwrap()).unwrap();
        assert_eq!(pd.family, Family::Monocot);
        assert_eq!(pd.seed, DEFAULT_SEED);
        assert_eq!(pd.nodes.len(), 3);
        assert_eq!(pd.nodes[1].azimuth_deg, 180.0);
        assert_eq!(pd.apical_extension, 5.0);
    }
}
