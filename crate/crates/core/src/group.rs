//! Compact subgroups of `O(p)` and their orbit geometry.
//!
//! Each supported group exposes closed forms for the quotient cost
//! `min_Q ‖Qᵀx − h‖²`, the point of `h`'s orbit closest to `x`, a minimizing
//! group element, Haar sampling on an orbit, and a canonical representative
//! of each orbit (used to build fundamental-domain reference grids).

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::points::{dist_sq, dot, norm_sq};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    Trivial,
    /// `{I, −I}`.
    Central,
    /// Diagonal `±1` matrices.
    Sign,
    /// Coordinate permutations (exchangeability).
    Permutation,
    /// `{I, P}` with `P = I − 2uuᵀ`.
    Reflection { u: Vec<f64> },
    /// Rotations of `R³` fixing `axis`.
    Zonal { axis: Vec<f64> },
    /// The full orthogonal group.
    Spherical,
}

/// A compact subgroup of `O(p)` acting on `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryGroup {
    kind: GroupKind,
    p: usize,
    /// Zonal only: orthonormal basis `(b1, b2)` of the plane orthogonal to the
    /// axis, oriented so that `b1 × b2 = axis`.
    plane: Option<[[f64; 3]; 2]>,
}

/// A member of a [`SymmetryGroup`], stored in the cheapest form for its kind.
#[derive(Debug, Clone, PartialEq)]
pub enum GroupElement {
    Identity,
    Central(bool),
    Sign(Vec<i8>),
    /// `(Qv)[perm[i]] = v[i]`.
    Permutation(Vec<usize>),
    Reflection(bool),
    /// Rotation angle in `[0, 2π)` about the zonal axis.
    Zonal(f64),
    Orthogonal(DMatrix<f64>),
}

fn sgn(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn normalized(v: &[f64], what: &str) -> Result<Vec<f64>> {
    let n = norm_sq(v).sqrt();
    if !n.is_finite() || n <= 0.0 {
        return Err(Error::invalid(format!("{what} must be a finite nonzero vector")));
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Ascending argsort, ties broken by index.
fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    idx
}

impl SymmetryGroup {
    pub fn new(kind: GroupKind, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        let mut plane = None;
        let kind = match kind {
            GroupKind::Reflection { u } => {
                if u.len() != p {
                    return Err(Error::invalid(format!(
                        "reflection vector has {} components, expected {p}",
                        u.len()
                    )));
                }
                GroupKind::Reflection {
                    u: normalized(&u, "reflection vector")?,
                }
            }
            GroupKind::Zonal { axis } => {
                if p != 3 {
                    return Err(Error::invalid("zonal symmetry requires p = 3"));
                }
                if axis.len() != 3 {
                    return Err(Error::invalid("zonal axis must have 3 components"));
                }
                let a = normalized(&axis, "zonal axis")?;
                plane = Some(orthonormal_plane([a[0], a[1], a[2]]));
                GroupKind::Zonal { axis: a }
            }
            k => k,
        };
        Ok(Self { kind, p, plane })
    }

    pub fn trivial(p: usize) -> Self {
        Self::new(GroupKind::Trivial, p).expect("p > 0")
    }

    /// Parses `trivial | central | sign | permutation | reflection:<u> |
    /// zonal[:<axis>] | spherical`, with `u` and `axis` as comma-separated
    /// floats. The zonal axis defaults to the third coordinate axis.
    pub fn parse(desc: &str, p: usize) -> Result<Self> {
        let desc = desc.trim();
        let (name, arg) = match desc.split_once(':') {
            Some((a, b)) => (a.trim(), Some(b.trim())),
            None => (desc, None),
        };
        let floats = |s: &str| -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad number {t:?} in group description")))
                })
                .collect()
        };
        let kind = match (name.to_ascii_lowercase().as_str(), arg) {
            ("trivial", None) => GroupKind::Trivial,
            ("central", None) => GroupKind::Central,
            ("sign", None) => GroupKind::Sign,
            ("permutation" | "exchangeable", None) => GroupKind::Permutation,
            ("spherical", None) => GroupKind::Spherical,
            ("reflection", Some(a)) => GroupKind::Reflection { u: floats(a)? },
            ("zonal", None) => GroupKind::Zonal {
                axis: vec![0.0, 0.0, 1.0],
            },
            ("zonal", Some(a)) => GroupKind::Zonal { axis: floats(a)? },
            ("reflection", None) => {
                return Err(Error::invalid("reflection needs a vector: reflection:<u1,...,up>"))
            }
            _ => return Err(Error::invalid(format!("unknown symmetry group {desc:?}"))),
        };
        Self::new(kind, p)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    /// Short kind name without parameters.
    pub fn name(&self) -> &'static str {
        match self.kind {
            GroupKind::Trivial => "trivial",
            GroupKind::Central => "central",
            GroupKind::Sign => "sign",
            GroupKind::Permutation => "permutation",
            GroupKind::Reflection { .. } => "reflection",
            GroupKind::Zonal { .. } => "zonal",
            GroupKind::Spherical => "spherical",
        }
    }

    /// Number of elements, `None` for infinite groups or overflow.
    pub fn order(&self) -> Option<usize> {
        match self.kind {
            GroupKind::Trivial => Some(1),
            GroupKind::Central | GroupKind::Reflection { .. } => Some(2),
            GroupKind::Sign => 1usize.checked_shl(self.p as u32).filter(|_| self.p < 64),
            GroupKind::Permutation => (1..=self.p).try_fold(1usize, |acc, k| acc.checked_mul(k)),
            GroupKind::Zonal { .. } | GroupKind::Spherical => None,
        }
    }

    /// Groups whose action permutes and/or flips coordinates, so that
    /// componentwise score functions commute with the action in a
    /// well-defined way.
    pub fn is_componentwise(&self) -> bool {
        matches!(
            self.kind,
            GroupKind::Trivial | GroupKind::Central | GroupKind::Sign | GroupKind::Permutation
        )
    }

    fn check(&self, v: &[f64], what: &str) -> Result<()> {
        if v.len() != self.p {
            return Err(Error::invalid(format!(
                "{what} has dimension {}, group acts on dimension {}",
                v.len(),
                self.p
            )));
        }
        Ok(())
    }

    fn reflect(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let c = 2.0 * dot(u, v);
        v.iter().zip(u).map(|(a, b)| a - c * b).collect()
    }

    /// Axial coordinate and in-plane coordinates for the zonal group.
    fn cylindrical(&self, v: &[f64]) -> (f64, f64, f64) {
        let GroupKind::Zonal { axis } = &self.kind else {
            unreachable!("cylindrical coordinates only exist for the zonal group")
        };
        let [b1, b2] = self.plane.as_ref().expect("zonal group carries its plane");
        (dot(axis, v), dot(b1, v), dot(b2, v))
    }

    fn cylindrical_point(&self, a: f64, c1: f64, c2: f64) -> Vec<f64> {
        let GroupKind::Zonal { axis } = &self.kind else {
            unreachable!()
        };
        let [b1, b2] = self.plane.as_ref().expect("zonal group carries its plane");
        (0..3).map(|k| a * axis[k] + c1 * b1[k] + c2 * b2[k]).collect()
    }

    /// `c(x, h) = min_{Q ∈ G} ‖Qᵀx − h‖²`.
    pub fn orbit_cost(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        self.check(x, "x")?;
        self.check(h, "h")?;
        Ok(self.orbit_cost_unchecked(x, h))
    }

    /// [`orbit_cost`](Self::orbit_cost) without dimension checks, for hot loops.
    pub fn orbit_cost_unchecked(&self, x: &[f64], h: &[f64]) -> f64 {
        match &self.kind {
            GroupKind::Trivial => dist_sq(x, h),
            GroupKind::Central => {
                let (mut minus, mut plus) = (0.0, 0.0);
                for (a, b) in x.iter().zip(h) {
                    minus += (a - b) * (a - b);
                    plus += (a + b) * (a + b);
                }
                minus.min(plus)
            }
            GroupKind::Sign => x
                .iter()
                .zip(h)
                .map(|(a, b)| (a.abs() - b.abs()).powi(2))
                .sum(),
            GroupKind::Permutation => {
                let mut xs = x.to_vec();
                let mut hs = h.to_vec();
                xs.sort_by(f64::total_cmp);
                hs.sort_by(f64::total_cmp);
                dist_sq(&xs, &hs)
            }
            GroupKind::Reflection { u } => {
                let direct = dist_sq(x, h);
                let reflected = dist_sq(&self.reflect(u, x), h);
                direct.min(reflected)
            }
            GroupKind::Zonal { .. } => {
                let (ax, x1, x2) = self.cylindrical(x);
                let (ah, h1, h2) = self.cylindrical(h);
                (ax - ah).powi(2) + (x1.hypot(x2) - h1.hypot(h2)).powi(2)
            }
            GroupKind::Spherical => (norm_sq(x).sqrt() - norm_sq(h).sqrt()).powi(2),
        }
    }

    /// The point of `{Qh : Q ∈ G}` closest to `x`.
    pub fn closest_orbit_point(&self, x: &[f64], h: &[f64]) -> Result<Vec<f64>> {
        self.check(x, "x")?;
        self.check(h, "h")?;
        Ok(match &self.kind {
            GroupKind::Trivial => h.to_vec(),
            GroupKind::Central => {
                if dist_sq(x, h) <= norm_sq_sum(x, h) {
                    h.to_vec()
                } else {
                    h.iter().map(|v| -v).collect()
                }
            }
            GroupKind::Sign => x.iter().zip(h).map(|(a, b)| sgn(*a) * b.abs()).collect(),
            GroupKind::Permutation => {
                let ox = argsort(x);
                let mut hs = h.to_vec();
                hs.sort_by(f64::total_cmp);
                let mut out = vec![0.0; self.p];
                for (k, &i) in ox.iter().enumerate() {
                    out[i] = hs[k];
                }
                out
            }
            GroupKind::Reflection { u } => {
                let ph = self.reflect(u, h);
                if dist_sq(x, h) <= dist_sq(x, &ph) {
                    h.to_vec()
                } else {
                    ph
                }
            }
            GroupKind::Zonal { .. } => {
                let (_, x1, x2) = self.cylindrical(x);
                let (ah, h1, h2) = self.cylindrical(h);
                let (rx, rh) = (x1.hypot(x2), h1.hypot(h2));
                if rx == 0.0 || rh == 0.0 {
                    h.to_vec()
                } else {
                    self.cylindrical_point(ah, rh * x1 / rx, rh * x2 / rx)
                }
            }
            GroupKind::Spherical => {
                let rh = norm_sq(h).sqrt();
                if rh == 0.0 {
                    vec![0.0; self.p]
                } else {
                    let rx = norm_sq(x).sqrt();
                    if rx == 0.0 {
                        return Err(Error::Degenerate(
                            "zero observation has no direction under spherical symmetry".into(),
                        ));
                    }
                    x.iter().map(|v| rh * v / rx).collect()
                }
            }
        })
    }

    /// A group element `Q` attaining [`orbit_cost`](Self::orbit_cost), so that
    /// `Q h` is the closest orbit point. Where the minimizer set is a
    /// continuum (spherical for `p ≥ 2`, degenerate zonal inputs) one is drawn
    /// uniformly from it; probability-zero ties in finite groups resolve to
    /// the identity component.
    pub fn argmin_sign<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        h: &[f64],
        rng: &mut R,
    ) -> Result<GroupElement> {
        self.check(x, "x")?;
        self.check(h, "h")?;
        Ok(match &self.kind {
            GroupKind::Trivial => GroupElement::Identity,
            GroupKind::Central => GroupElement::Central(dist_sq(x, h) > norm_sq_sum(x, h)),
            GroupKind::Sign => GroupElement::Sign(
                x.iter()
                    .zip(h)
                    .map(|(a, b)| (sgn(*a) * sgn(*b)) as i8)
                    .collect(),
            ),
            GroupKind::Permutation => {
                let ox = argsort(x);
                let oh = argsort(h);
                let mut perm = vec![0usize; self.p];
                for (k, &j) in oh.iter().enumerate() {
                    perm[j] = ox[k];
                }
                GroupElement::Permutation(perm)
            }
            GroupKind::Reflection { u } => {
                GroupElement::Reflection(dist_sq(x, h) > dist_sq(x, &self.reflect(u, h)))
            }
            GroupKind::Zonal { .. } => {
                let (_, x1, x2) = self.cylindrical(x);
                let (_, h1, h2) = self.cylindrical(h);
                if x1.hypot(x2) == 0.0 || h1.hypot(h2) == 0.0 {
                    GroupElement::Zonal(rng.random::<f64>() * 2.0 * PI)
                } else {
                    GroupElement::Zonal((x2.atan2(x1) - h2.atan2(h1)).rem_euclid(2.0 * PI))
                }
            }
            GroupKind::Spherical => {
                let rh = norm_sq(h).sqrt();
                let rx = norm_sq(x).sqrt();
                if rh == 0.0 {
                    GroupElement::Orthogonal(haar_orthogonal(self.p, rng))
                } else if rx == 0.0 {
                    return Err(Error::Degenerate(
                        "zero observation has no direction under spherical symmetry".into(),
                    ));
                } else if self.p == 1 {
                    GroupElement::Orthogonal(DMatrix::from_element(1, 1, sgn(x[0]) * sgn(h[0])))
                } else {
                    // Q = H_x · diag(1, R) · H_hᵀ maps h/‖h‖ to x/‖x‖; R ranges
                    // over the stabilizer O(p−1), drawn from Haar measure.
                    let hx = householder_to(&x.iter().map(|v| v / rx).collect::<Vec<_>>());
                    let hh = householder_to(&h.iter().map(|v| v / rh).collect::<Vec<_>>());
                    let r = haar_orthogonal(self.p - 1, rng);
                    let mut mid = DMatrix::<f64>::identity(self.p, self.p);
                    mid.view_mut((1, 1), (self.p - 1, self.p - 1)).copy_from(&r);
                    GroupElement::Orthogonal(hx * mid * hh.transpose())
                }
            }
        })
    }

    /// `S h` with `S` drawn from the Haar measure on the group.
    pub fn sample_orbit_uniform<R: Rng + ?Sized>(&self, h: &[f64], rng: &mut R) -> Vec<f64> {
        match &self.kind {
            GroupKind::Trivial => h.to_vec(),
            GroupKind::Central => {
                if rng.random::<bool>() {
                    h.iter().map(|v| -v).collect()
                } else {
                    h.to_vec()
                }
            }
            GroupKind::Sign => h
                .iter()
                .map(|v| if rng.random::<bool>() { -v } else { *v })
                .collect(),
            GroupKind::Permutation => {
                use rand::seq::SliceRandom;
                let mut out = h.to_vec();
                out.shuffle(rng);
                out
            }
            GroupKind::Reflection { u } => {
                if rng.random::<bool>() {
                    self.reflect(u, h)
                } else {
                    h.to_vec()
                }
            }
            GroupKind::Zonal { .. } => {
                let theta = rng.random::<f64>() * 2.0 * PI;
                GroupElement::Zonal(theta).apply(self, h)
            }
            GroupKind::Spherical => {
                let r = norm_sq(h).sqrt();
                let dir = uniform_direction(self.p, rng);
                dir.into_iter().map(|v| v * r).collect()
            }
        }
    }

    /// One element drawn from the Haar measure.
    pub fn sample_element<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match &self.kind {
            GroupKind::Trivial => GroupElement::Identity,
            GroupKind::Central => GroupElement::Central(rng.random()),
            GroupKind::Sign => GroupElement::Sign(
                (0..self.p)
                    .map(|_| if rng.random::<bool>() { -1 } else { 1 })
                    .collect(),
            ),
            GroupKind::Permutation => {
                use rand::seq::SliceRandom;
                let mut perm: Vec<usize> = (0..self.p).collect();
                perm.shuffle(rng);
                GroupElement::Permutation(perm)
            }
            GroupKind::Reflection { .. } => GroupElement::Reflection(rng.random()),
            GroupKind::Zonal { .. } => GroupElement::Zonal(rng.random::<f64>() * 2.0 * PI),
            GroupKind::Spherical => GroupElement::Orthogonal(haar_orthogonal(self.p, rng)),
        }
    }

    /// All elements of a finite group. Sign groups are enumerated up to
    /// `p = 12` and permutation groups up to `p = 7`.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        match &self.kind {
            GroupKind::Trivial => Ok(vec![GroupElement::Identity]),
            GroupKind::Central => Ok(vec![GroupElement::Central(false), GroupElement::Central(true)]),
            GroupKind::Reflection { .. } => Ok(vec![
                GroupElement::Reflection(false),
                GroupElement::Reflection(true),
            ]),
            GroupKind::Sign if self.p <= 12 => Ok((0..1usize << self.p)
                .map(|mask| {
                    GroupElement::Sign(
                        (0..self.p)
                            .map(|k| if mask >> k & 1 == 1 { -1 } else { 1 })
                            .collect(),
                    )
                })
                .collect()),
            GroupKind::Permutation if self.p <= 7 => {
                let mut out = Vec::new();
                permutations(&mut (0..self.p).collect(), 0, &mut out);
                Ok(out.into_iter().map(GroupElement::Permutation).collect())
            }
            GroupKind::Sign | GroupKind::Permutation => Err(Error::Unsupported(format!(
                "{} group in dimension {} is too large to enumerate",
                self.name(),
                self.p
            ))),
            GroupKind::Zonal { .. } | GroupKind::Spherical => Err(Error::Unsupported(format!(
                "{} group is infinite",
                self.name()
            ))),
        }
    }

    /// Canonical representative of `z`'s orbit. The image of this map is a
    /// fundamental domain: two points with distinct images never share an
    /// orbit, so grids built from it satisfy the one-point-per-orbit
    /// requirement.
    pub fn canonicalize(&self, z: &[f64]) -> Vec<f64> {
        match &self.kind {
            GroupKind::Trivial => z.to_vec(),
            GroupKind::Central => match z.iter().find(|v| **v != 0.0) {
                Some(v) if *v < 0.0 => z.iter().map(|v| -v).collect(),
                _ => z.to_vec(),
            },
            GroupKind::Sign => z.iter().map(|v| v.abs()).collect(),
            GroupKind::Permutation => {
                let mut s = z.to_vec();
                s.sort_by(f64::total_cmp);
                s
            }
            GroupKind::Reflection { u } => {
                if dot(u, z) < 0.0 {
                    self.reflect(u, z)
                } else {
                    z.to_vec()
                }
            }
            GroupKind::Zonal { .. } => {
                let (a, c1, c2) = self.cylindrical(z);
                self.cylindrical_point(a, c1.hypot(c2), 0.0)
            }
            GroupKind::Spherical => {
                let mut out = vec![0.0; self.p];
                out[0] = norm_sq(z).sqrt();
                out
            }
        }
    }
}

impl fmt::Display for SymmetryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
        match &self.kind {
            GroupKind::Reflection { u } => write!(f, "reflection:{}", join(u)),
            GroupKind::Zonal { axis } => write!(f, "zonal:{}", join(axis)),
            _ => f.write_str(self.name()),
        }
    }
}

fn norm_sq_sum(x: &[f64], h: &[f64]) -> f64 {
    x.iter().zip(h).map(|(a, b)| (a + b) * (a + b)).sum()
}

fn permutations(v: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == v.len() {
        out.push(v.clone());
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, out);
        v.swap(k, i);
    }
}

fn orthonormal_plane(a: [f64; 3]) -> [[f64; 3]; 2] {
    // Start from the coordinate axis least aligned with `a`.
    let k = (0..3)
        .min_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()))
        .expect("three coordinates");
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let d = a[0] * e[0] + a[1] * e[1] + a[2] * e[2];
    let mut b1 = [e[0] - d * a[0], e[1] - d * a[1], e[2] - d * a[2]];
    let n = (b1[0] * b1[0] + b1[1] * b1[1] + b1[2] * b1[2]).sqrt();
    b1.iter_mut().for_each(|v| *v /= n);
    // b2 = a × b1, so that b1 × b2 = a.
    let b2 = [
        a[1] * b1[2] - a[2] * b1[1],
        a[2] * b1[0] - a[0] * b1[2],
        a[0] * b1[1] - a[1] * b1[0],
    ];
    [b1, b2]
}

/// Orthogonal matrix whose first column is the unit vector `v`.
pub(crate) fn householder_to(v: &[f64]) -> DMatrix<f64> {
    let p = v.len();
    // H = I − 2wwᵀ/‖w‖² with w = e1 − v maps e1 to v. When v[0] > 0 use
    // w = e1 + v instead (maps e1 to −v, no cancellation) and negate the
    // first column afterwards.
    let flip = v[0] > 0.0;
    let mut w: Vec<f64> = v.iter().map(|x| if flip { *x } else { -x }).collect();
    w[0] += 1.0;
    let ww = norm_sq(&w);
    let mut h = DMatrix::<f64>::identity(p, p);
    for i in 0..p {
        for j in 0..p {
            h[(i, j)] -= 2.0 * w[i] * w[j] / ww;
        }
    }
    if flip {
        h.column_mut(0).neg_mut();
    }
    h
}

/// Haar-distributed element of `O(p)`: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal absorbed into `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    if p == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::<f64>::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Uniform point on the unit sphere `S^{p−1}`.
pub fn uniform_direction<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm_sq(&z).sqrt();
        if n > 0.0 {
            return z.into_iter().map(|v| v / n).collect();
        }
    }
}

impl GroupElement {
    /// `Q v`.
    pub fn apply(&self, g: &SymmetryGroup, v: &[f64]) -> Vec<f64> {
        match self {
            GroupElement::Identity => v.to_vec(),
            GroupElement::Central(neg) => {
                if *neg {
                    v.iter().map(|x| -x).collect()
                } else {
                    v.to_vec()
                }
            }
            GroupElement::Sign(s) => v.iter().zip(s).map(|(x, s)| x * *s as f64).collect(),
            GroupElement::Permutation(perm) => {
                let mut out = vec![0.0; v.len()];
                for (i, &j) in perm.iter().enumerate() {
                    out[j] = v[i];
                }
                out
            }
            GroupElement::Reflection(on) => match (&g.kind, on) {
                (GroupKind::Reflection { u }, true) => g.reflect(u, v),
                _ => v.to_vec(),
            },
            GroupElement::Zonal(theta) => {
                let (a, c1, c2) = g.cylindrical(v);
                let (s, c) = theta.sin_cos();
                g.cylindrical_point(a, c * c1 - s * c2, s * c1 + c * c2)
            }
            GroupElement::Orthogonal(m) => {
                let out = m * nalgebra::DVector::from_column_slice(v);
                out.as_slice().to_vec()
            }
        }
    }

    /// Explicit `p × p` matrix of the element.
    pub fn matrix(&self, g: &SymmetryGroup) -> DMatrix<f64> {
        if let GroupElement::Orthogonal(m) = self {
            return m.clone();
        }
        let p = g.dim();
        let mut m = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            let col = self.apply(g, &e);
            for i in 0..p {
                m[(i, j)] = col[i];
            }
        }
        m
    }

    /// `Qᵀ v`.
    pub fn apply_transpose(&self, g: &SymmetryGroup, v: &[f64]) -> Vec<f64> {
        let out = self.matrix(g).transpose() * nalgebra::DVector::from_column_slice(v);
        out.as_slice().to_vec()
    }
}
