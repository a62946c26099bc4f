//! Boundary configurations of a flexurally vibrating rod.
//!
//! A fastening is described by the 4x8 coefficient matrix
//!
//! ```text
//! | a1  0   0   a4  0   0   0   0  |
//! | 0   a2  a3  0   0   0   0   0  |
//! | 0   0   0   0   a5  0   0   a8 |
//! | 0   0   0   0   0   a6  a7  0  |
//! ```
//!
//! with nonnegative entries. Rows 1-2 hold the translational and rotational
//! conditions at the left end, rows 3-4 the same at the right end; each row is
//! only defined up to a positive scale.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Threshold on canonical (unit-norm) coefficients below which a coefficient
/// counts as zero for classification. Reconstruction noise sits well above
/// machine epsilon but below 1e-6.
pub const ZERO_COEFF_TOL: f64 = 1e-9;

/// One boundary condition row: `c_low` weights the lower-derivative term
/// (displacement or slope), `c_high` the higher one (shear or moment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryForm {
    pub c_low: f64,
    pub c_high: f64,
}

impl BoundaryForm {
    /// Builds a form, rejecting negative coefficients and the zero row.
    /// `row` is the 1-based row index used in error messages.
    pub fn new(c_low: f64, c_high: f64, row: usize) -> Result<Self> {
        for (offset, v) in [(0usize, c_low), (1, c_high)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeCoefficient {
                    index: coeff_index(row, offset),
                    value: v,
                });
            }
        }
        if c_low == 0.0 && c_high == 0.0 {
            return Err(Error::ZeroRow { row });
        }
        Ok(Self { c_low, c_high })
    }

    /// Unit-norm representative with the first nonzero component positive.
    pub fn canonical(&self) -> Self {
        let n = self.norm();
        let mut f = Self {
            c_low: self.c_low / n,
            c_high: self.c_high / n,
        };
        let lead = if f.c_low != 0.0 { f.c_low } else { f.c_high };
        if lead < 0.0 {
            f.c_low = -f.c_low;
            f.c_high = -f.c_high;
        }
        f
    }

    pub fn norm(&self) -> f64 {
        self.c_low.hypot(self.c_high)
    }

    /// Sine of the angle between the lines spanned by two forms
    /// (projective distance; insensitive to row scaling).
    pub fn sin_angle(&self, other: &Self) -> f64 {
        let cross = self.c_low * other.c_high - self.c_high * other.c_low;
        (cross / (self.norm() * other.norm())).abs().min(1.0)
    }
}

fn coeff_index(row: usize, offset: usize) -> usize {
    // Row pairs in the matrix: (a1,a4), (a2,a3), (a5,a8), (a6,a7).
    match (row, offset) {
        (1, 0) => 1,
        (1, 1) => 4,
        (2, 0) => 2,
        (2, 1) => 3,
        (3, 0) => 5,
        (3, 1) => 8,
        (4, 0) => 6,
        _ => 7,
    }
}

/// The four boundary condition rows: `u1`/`u2` translational and rotational at
/// the left end, `u3`/`u4` the same at the right end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FasteningConfig {
    pub u1: BoundaryForm,
    pub u2: BoundaryForm,
    pub u3: BoundaryForm,
    pub u4: BoundaryForm,
}

impl FasteningConfig {
    pub fn new(u1: BoundaryForm, u2: BoundaryForm, u3: BoundaryForm, u4: BoundaryForm) -> Self {
        Self { u1, u2, u3, u4 }
    }

    /// Builds a configuration from the eight matrix coefficients
    /// `[a1, a2, a3, a4, a5, a6, a7, a8]`.
    pub fn from_coefficients(a: &[f64; 8]) -> Result<Self> {
        Ok(Self {
            u1: BoundaryForm::new(a[0], a[3], 1)?,
            u2: BoundaryForm::new(a[1], a[2], 2)?,
            u3: BoundaryForm::new(a[4], a[7], 3)?,
            u4: BoundaryForm::new(a[5], a[6], 4)?,
        })
    }

    /// The eight coefficients in matrix order `[a1..a8]`.
    pub fn coefficients(&self) -> [f64; 8] {
        [
            self.u1.c_low,
            self.u2.c_low,
            self.u2.c_high,
            self.u1.c_high,
            self.u3.c_low,
            self.u4.c_low,
            self.u4.c_high,
            self.u3.c_high,
        ]
    }

    pub fn rows(&self) -> [BoundaryForm; 4] {
        [self.u1, self.u2, self.u3, self.u4]
    }

    /// Maximum projective row distance to another configuration.
    pub fn distance(&self, other: &Self) -> f64 {
        self.rows()
            .iter()
            .zip(other.rows().iter())
            .map(|(a, b)| a.sin_angle(b))
            .fold(0.0, f64::max)
    }
}

/// Scales every row to unit norm with positive leading component. Idempotent;
/// linearly equivalent configurations collapse to one representative.
pub fn canonicalize(config: &FasteningConfig) -> FasteningConfig {
    FasteningConfig {
        u1: config.u1.canonical(),
        u2: config.u2.canonical(),
        u3: config.u3.canonical(),
        u4: config.u4.canonical(),
    }
}

/// Exchanges the two ends: (u1,u2) with (u3,u4). Involution.
pub fn dual_of(config: &FasteningConfig) -> FasteningConfig {
    FasteningConfig {
        u1: config.u3,
        u2: config.u4,
        u3: config.u1,
        u4: config.u2,
    }
}

/// The 16 nonzero 4x4 minors of the coefficient matrix, one column picked from
/// each row pair. Indexed by a 4-bit pattern: bit r set means row r+1
/// contributes its high column (a4, a3, a8, a7), clear means the low one.
#[derive(Debug, Clone, Copy)]
pub struct MinorSet {
    values: [f64; 16],
}

/// Column index (1-based) contributed by `row` under `pattern`.
fn minor_column(row: usize, pattern: usize) -> usize {
    let high = pattern >> row & 1 == 1;
    match (row, high) {
        (0, false) => 1,
        (0, true) => 4,
        (1, false) => 2,
        (1, true) => 3,
        (2, false) => 5,
        (2, true) => 8,
        (3, false) => 6,
        _ => 7,
    }
}

/// Determinant sign of the selected columns taken in increasing column order:
/// parity of the permutation sorting the per-row column list.
fn minor_sign(pattern: usize) -> f64 {
    let cols: Vec<usize> = (0..4).map(|r| minor_column(r, pattern)).collect();
    let mut inversions = 0;
    for i in 0..4 {
        for j in i + 1..4 {
            if cols[i] > cols[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Computes all 16 signed minors as determinants of the selected columns of
/// the coefficient matrix in increasing column order.
pub fn minors(config: &FasteningConfig) -> MinorSet {
    let rows = config.rows();
    let mut values = [0.0; 16];
    for (pattern, slot) in values.iter_mut().enumerate() {
        let mut product = 1.0;
        for (r, form) in rows.iter().enumerate() {
            product *= if pattern >> r & 1 == 1 {
                form.c_high
            } else {
                form.c_low
            };
        }
        *slot = minor_sign(pattern) * product;
    }
    MinorSet { values }
}

impl MinorSet {
    /// Signed minor for the given column quadruple, e.g. `get(1,2,5,6)`.
    /// Returns zero for column choices outside the structural pattern.
    pub fn get(&self, i: usize, j: usize, k: usize, m: usize) -> f64 {
        let mut requested = [i, j, k, m];
        requested.sort_unstable();
        for pattern in 0..16 {
            let mut cols: Vec<usize> = (0..4).map(|r| minor_column(r, pattern)).collect();
            cols.sort_unstable();
            if cols == requested {
                return self.values[pattern];
            }
        }
        0.0
    }

    /// Minor by bit pattern (bit r set: row r+1 uses its high column).
    pub fn by_pattern(&self, pattern: usize) -> f64 {
        self.values[pattern & 0xf]
    }
}

/// Translational condition at one end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TranslationalFastening {
    /// Displacement forced to zero (high coefficient vanishes).
    DisplacementFixed,
    /// No shear restraint (low coefficient vanishes).
    ShearFree,
    /// Translational spring with relative stiffness `k_t = c_low / c_high`.
    Spring { k_t: f64 },
}

/// Rotational condition at one end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RotationalFastening {
    SlopeFixed,
    MomentFree,
    /// Rotational spring with relative stiffness `k_r = c_low / c_high`.
    Spring { k_r: f64 },
}

/// The five canonical end types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndName {
    RigidClamping,
    FreeSupport,
    FreeEdge,
    FloatingFixing,
    ElasticFixing,
}

/// Classified fastening of one end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FasteningLabel {
    pub translational: TranslationalFastening,
    pub rotational: RotationalFastening,
    pub end_name: EndName,
}

/// Classifies one end from its translational and rotational forms. Decisions
/// are taken on canonical coefficients against [`ZERO_COEFF_TOL`], so the
/// labels are invariant under positive row scaling.
pub fn classify_end(translational: &BoundaryForm, rotational: &BoundaryForm) -> FasteningLabel {
    let t = translational.canonical();
    let r = rotational.canonical();
    let translational = if t.c_high.abs() <= ZERO_COEFF_TOL {
        TranslationalFastening::DisplacementFixed
    } else if t.c_low.abs() <= ZERO_COEFF_TOL {
        TranslationalFastening::ShearFree
    } else {
        TranslationalFastening::Spring {
            k_t: t.c_low / t.c_high,
        }
    };
    let rotational = if r.c_high.abs() <= ZERO_COEFF_TOL {
        RotationalFastening::SlopeFixed
    } else if r.c_low.abs() <= ZERO_COEFF_TOL {
        RotationalFastening::MomentFree
    } else {
        RotationalFastening::Spring {
            k_r: r.c_low / r.c_high,
        }
    };
    let end_name = match (&translational, &rotational) {
        (TranslationalFastening::DisplacementFixed, RotationalFastening::SlopeFixed) => {
            EndName::RigidClamping
        }
        (TranslationalFastening::DisplacementFixed, RotationalFastening::MomentFree) => {
            EndName::FreeSupport
        }
        (TranslationalFastening::ShearFree, RotationalFastening::MomentFree) => EndName::FreeEdge,
        (TranslationalFastening::ShearFree, RotationalFastening::SlopeFixed) => {
            EndName::FloatingFixing
        }
        _ => EndName::ElasticFixing,
    };
    FasteningLabel {
        translational,
        rotational,
        end_name,
    }
}

impl std::fmt::Display for FasteningLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.end_name {
            EndName::RigidClamping => write!(f, "rigid clamping"),
            EndName::FreeSupport => write!(f, "free support"),
            EndName::FreeEdge => write!(f, "free edge"),
            EndName::FloatingFixing => write!(f, "floating fixing"),
            EndName::ElasticFixing => {
                write!(f, "elastic fixing (")?;
                let mut first = true;
                if let TranslationalFastening::Spring { k_t } = self.translational {
                    write!(f, "k_t={k_t}")?;
                    first = false;
                }
                if let RotationalFastening::Spring { k_r } = self.rotational {
                    if !first {
                        write!(f, ", ")?;
                    }
                    write!(f, "k_r={k_r}")?;
                    first = false;
                }
                match (first, &self.translational, &self.rotational) {
                    (_, TranslationalFastening::DisplacementFixed, _) => {
                        write!(f, ", displacement-fixed")?
                    }
                    (_, TranslationalFastening::ShearFree, _) => write!(f, ", shear-free")?,
                    _ => {}
                }
                match &self.rotational {
                    RotationalFastening::SlopeFixed => write!(f, ", slope-fixed")?,
                    RotationalFastening::MomentFree => write!(f, ", moment-free")?,
                    _ => {}
                }
                write!(f, ")")
            }
        }
    }
}

/// Classifies both ends of a configuration.
pub fn classify_config(config: &FasteningConfig) -> (FasteningLabel, FasteningLabel) {
    (
        classify_end(&config.u1, &config.u2),
        classify_end(&config.u3, &config.u4),
    )
}
