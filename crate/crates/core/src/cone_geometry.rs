//! Cone families tiling ℝᵈ around an apex.
//!
//! Every cone `W_l` is simplicial: it is the intersection of `d` half-spaces
//! through the apex, each described by an inward unit normal `û_j`. The cone
//! axis `x_l` is the symmetry direction of the right circular cone of opening
//! angle `θ` that contains `W_l`.
//!
//! Membership never compares raw dot products of difference vectors. Instead
//! every point is mapped, per facet normal, to an [`OrderKey`] and
//! `q ∈ W_l(p)` holds iff `key_j(q) > key_j(p)` for every facet `j`. The key is
//! `(⟨x, n⟩, ⟨x, m⟩, s·tag)` where `m` is `n` rotated in the `(e₀, e₁)` plane
//! and `s` is the sign of the first non-zero component of `n`. This is a
//! symbolic perturbation of the difference vector, so boundary directions are
//! assigned to exactly one cone, the key of `−n` is the exact reverse of the
//! key of `n` (which gives the reflection property), and the same ordering is
//! used by the static range trees, the kinetic sorted lists and the oracle.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::PointId;

/// Tag used for an apex that is not a data point (an external query).
pub const QUERY_TAG: i64 = -1;

/// The default (and largest allowed) opening angle.
pub const DEFAULT_OPENING_ANGLE: f64 = PI / 3.0;

/// Tag of a data point inside an [`OrderKey`].
#[inline]
pub fn tag(id: PointId) -> i64 {
    i64::from(id.0)
}

/// Total order of points along one projection direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderKey {
    pub primary: f64,
    pub secondary: f64,
    pub tie: i64,
}

impl OrderKey {
    fn new(primary: f64, secondary: f64, tie: i64) -> Self {
        // `+ 0.0` folds -0.0 into +0.0 so that `total_cmp` agrees with `==`.
        Self {
            primary: primary + 0.0,
            secondary: secondary + 0.0,
            tie,
        }
    }

    /// The key of the same point along the opposite direction.
    pub fn negated(self) -> Self {
        Self::new(-self.primary, -self.secondary, -self.tie)
    }
}

impl Eq for OrderKey {}

impl PartialOrd for OrderKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.primary
            .total_cmp(&other.primary)
            .then(self.secondary.total_cmp(&other.secondary))
            .then(self.tie.cmp(&other.tie))
    }
}

/// A projection direction shared by one or more cone roles. Stored with a
/// positive leading component; roles along `−dir` use the reversed order.
#[derive(Debug, Clone)]
pub struct Line {
    pub dir: Vec<f64>,
    tie_dir: Vec<f64>,
}

impl Line {
    fn new(dir: Vec<f64>) -> Self {
        let tie_dir = tie_direction(&dir);
        Self { dir, tie_dir }
    }

    /// Secondary direction used to order points level along `dir`.
    pub fn tie_dir(&self) -> &[f64] {
        &self.tie_dir
    }

    /// Key of `pos` along this line.
    #[inline]
    pub fn key(&self, pos: &[f64], tag: i64) -> OrderKey {
        OrderKey::new(dot(pos, &self.dir), dot(pos, &self.tie_dir), tag)
    }
}

/// Which line a cone coordinate uses and in which orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Role {
    pub line: usize,
    pub reversed: bool,
}

/// One simplicial cone `W_l`.
#[derive(Debug, Clone)]
pub struct Cone {
    pub axis: Vec<f64>,
    pub facet_normals: Vec<Vec<f64>>,
    /// `d` facet roles followed by the axis role.
    pub roles: Vec<Role>,
}

/// The `c` cones `W_0..W_{c-1}` around the origin.
#[derive(Debug, Clone)]
pub struct ConeFamily {
    dimension: usize,
    opening_angle: f64,
    cones: Vec<Cone>,
    reflection: Vec<usize>,
    lines: Vec<Line>,
}

impl ConeFamily {
    /// Builds the cone family for `dimension` and `opening_angle`.
    ///
    /// In the plane the cones are `2·⌈π/θ⌉` equal wedges (six wedges of
    /// angle π/3 for the default angle), wedge `l` spanning polar angles
    /// `[lα, (l+1)α)`. For `d ≥ 3` the facets of the cross-polytope are split
    /// by longest-edge bisection until every cone fits in a circular cone of
    /// half-angle `θ/2` around its axis.
    pub fn new(dimension: usize, opening_angle: f64) -> Result<Self> {
        if dimension < 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be at least 2, got {dimension}"
            )));
        }
        if !(opening_angle > 0.0 && opening_angle <= DEFAULT_OPENING_ANGLE + 1e-15) {
            return Err(Error::InvalidParameter(format!(
                "opening angle must lie in (0, π/3], got {opening_angle}"
            )));
        }
        let raw = if dimension == 2 {
            planar_cones(opening_angle)
        } else {
            simplicial_cones(dimension, opening_angle)
        };
        Ok(Self::assemble(dimension, opening_angle, raw))
    }

    /// The default family for `dimension` (θ = π/3).
    pub fn with_default_angle(dimension: usize) -> Result<Self> {
        Self::new(dimension, DEFAULT_OPENING_ANGLE)
    }

    fn assemble(dimension: usize, opening_angle: f64, raw: Vec<(Vec<f64>, Vec<Vec<f64>>)>) -> Self {
        let c = raw.len();
        let mut lines: Vec<Line> = Vec::new();
        let mut role_of = |v: &[f64]| -> Role {
            let reversed = lex_sign(v) < 0;
            let canon: Vec<f64> = if reversed {
                v.iter().map(|x| -x + 0.0).collect()
            } else {
                v.iter().map(|x| x + 0.0).collect()
            };
            let line = match lines.iter().position(|l| l.dir == canon) {
                Some(i) => i,
                None => {
                    lines.push(Line::new(canon));
                    lines.len() - 1
                }
            };
            Role { line, reversed }
        };
        let cones: Vec<Cone> = raw
            .into_iter()
            .map(|(axis, facet_normals)| {
                let mut roles: Vec<Role> = facet_normals.iter().map(|n| role_of(n)).collect();
                roles.push(role_of(&axis));
                Cone {
                    axis,
                    facet_normals,
                    roles,
                }
            })
            .collect();
        // Both constructions emit the first half of the family followed by
        // the exact negations of those cones.
        let reflection = (0..c).map(|l| (l + c / 2) % c).collect();
        Self {
            dimension,
            opening_angle,
            cones,
            reflection,
            lines,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn opening_angle(&self) -> f64 {
        self.opening_angle
    }

    /// Number of cones `c`.
    pub fn len(&self) -> usize {
        self.cones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cones.is_empty()
    }

    pub fn cone(&self, l: usize) -> &Cone {
        &self.cones[l]
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    /// Index `l'` of the cone with axis `−x_l`.
    pub fn reflection(&self, l: usize) -> usize {
        self.reflection[l]
    }

    /// Distinct projection lines used by all cone roles.
    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    /// Key of `pos` for coordinate `j` of cone `l` (`j == d` is the axis).
    #[inline]
    pub fn key(&self, l: usize, j: usize, pos: &[f64], tag: i64) -> OrderKey {
        let role = self.cones[l].roles[j];
        let k = self.lines[role.line].key(pos, tag);
        if role.reversed {
            k.negated()
        } else {
            k
        }
    }

    /// All `d` facet keys of `pos` in cone `l`.
    pub fn facet_keys(&self, l: usize, pos: &[f64], tag: i64) -> Vec<OrderKey> {
        (0..self.dimension).map(|j| self.key(l, j, pos, tag)).collect()
    }

    /// Whether `target ∈ W_l(apex)`.
    pub fn contains(&self, l: usize, apex: &[f64], apex_tag: i64, target: &[f64], target_tag: i64) -> bool {
        (0..self.dimension).all(|j| self.key(l, j, target, target_tag) > self.key(l, j, apex, apex_tag))
    }

    /// The cone of the apex that contains `target`, for tagged points.
    pub fn classify_tagged(&self, apex: &[f64], apex_tag: i64, target: &[f64], target_tag: i64) -> usize {
        if let Some(l) = (0..self.len()).find(|&l| self.contains(l, apex, apex_tag, target, target_tag)) {
            return l;
        }
        // Rounding in non-conforming facets can leave a gap of width ~1 ulp;
        // fall back to the cone with the largest worst-facet margin.
        let diff: Vec<f64> = target.iter().zip(apex).map(|(t, a)| t - a).collect();
        (0..self.len())
            .max_by(|&a, &b| {
                let ma = self.margin(a, &diff);
                let mb = self.margin(b, &diff);
                ma.total_cmp(&mb)
            })
            .unwrap_or(0)
    }

    fn margin(&self, l: usize, dir: &[f64]) -> f64 {
        self.cones[l]
            .facet_normals
            .iter()
            .map(|n| dot(dir, n))
            .fold(f64::INFINITY, f64::min)
    }

    /// The unique `l` with `target ∈ W_l(apex)`.
    pub fn classify(&self, apex: &[f64], target: &[f64]) -> Result<usize> {
        self.check_dim(apex)?;
        self.check_dim(target)?;
        if apex == target {
            return Err(Error::Degenerate("target coincides with apex".into()));
        }
        Ok(self.classify_tagged(apex, QUERY_TAG, target, 0))
    }

    /// Coordinates of `point` in cone `l`: facet-normal projections and the
    /// axis projection.
    pub fn cone_coords(&self, l: usize, point: &[f64]) -> (Vec<f64>, f64) {
        let cone = &self.cones[l];
        let u = cone.facet_normals.iter().map(|n| dot(point, n)).collect();
        (u, dot(point, &cone.axis))
    }

    fn check_dim(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dimension {
            return Err(Error::InvalidInput(format!(
                "expected a point of dimension {}, got {}",
                self.dimension,
                p.len()
            )));
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalized(a: &[f64]) -> Vec<f64> {
    let n = norm(a);
    a.iter().map(|x| x / n).collect()
}

fn lex_sign(v: &[f64]) -> i64 {
    for &x in v {
        if x > 0.0 {
            return 1;
        }
        if x < 0.0 {
            return -1;
        }
    }
    0
}

/// `v` rotated by +90° in the (e₀, e₁) plane, transposed: the secondary
/// functional `x ↦ ⟨A x, v⟩`.
fn tie_direction(v: &[f64]) -> Vec<f64> {
    let mut m = vec![0.0; v.len()];
    m[0] = v[1];
    m[1] = -v[0];
    m
}

fn negate(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| -x).collect()
}

type RawCone = (Vec<f64>, Vec<Vec<f64>>);

fn planar_cones(opening_angle: f64) -> Vec<RawCone> {
    let half = (PI / opening_angle - 1e-12).ceil().max(3.0) as usize;
    let c = 2 * half;
    // Boundary rays for the first half; the rest are exact negations.
    let rays: Vec<Vec<f64>> = if c == 6 {
        let s = 3f64.sqrt() / 2.0;
        vec![vec![1.0, 0.0], vec![0.5, s], vec![-0.5, s]]
    } else {
        let alpha = 2.0 * PI / c as f64;
        (0..half)
            .map(|l| {
                let a = alpha * l as f64;
                vec![a.cos(), a.sin()]
            })
            .collect()
    };
    let ray = |l: usize| -> Vec<f64> {
        let l = l % c;
        if l < half {
            rays[l].clone()
        } else {
            negate(&rays[l - half])
        }
    };
    let lower_normal = |l: usize| -> Vec<f64> {
        let r = ray(l);
        vec![-r[1] + 0.0, r[0] + 0.0]
    };
    let mut first = Vec::with_capacity(half);
    for l in 0..half {
        let n1 = lower_normal(l);
        let n2 = negate(&lower_normal(l + 1));
        let axis = if c == 6 {
            // 30° + 60°·l coincides with the negated lower normal of wedge l+2.
            negate(&lower_normal(l + 2))
        } else {
            let (a, b) = (ray(l), ray(l + 1));
            normalized(&[a[0] + b[0], a[1] + b[1]])
        };
        first.push((axis, vec![n1, n2]));
    }
    mirror(first)
}

fn mirror(first: Vec<RawCone>) -> Vec<RawCone> {
    let second: Vec<RawCone> = first
        .iter()
        .map(|(axis, normals)| (negate(axis), normals.iter().map(|n| negate(n)).collect()))
        .collect();
    first.into_iter().chain(second).collect()
}

fn simplicial_cones(d: usize, opening_angle: f64) -> Vec<RawCone> {
    let limit = opening_angle / 2.0;
    let mut first = Vec::new();
    // Cross-polytope facets with a positive first vertex; the others follow
    // by reflection.
    for mask in 0..(1usize << (d - 1)) {
        let vertices: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                let negative = i > 0 && (mask >> (i - 1)) & 1 == 1;
                v[i] = if negative { -1.0 } else { 1.0 };
                v
            })
            .collect();
        bisect(vertices, limit, &mut first);
    }
    mirror(first)
}

fn angular_radius(vertices: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let d = vertices[0].len();
    let mut sum = vec![0.0; d];
    for v in vertices {
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let axis = normalized(&sum);
    let radius = vertices
        .iter()
        .map(|v| dot(&axis, v).clamp(-1.0, 1.0).acos())
        .fold(0.0, f64::max);
    (axis, radius)
}

fn bisect(vertices: Vec<Vec<f64>>, limit: f64, out: &mut Vec<RawCone>) {
    let (axis, radius) = angular_radius(&vertices);
    if radius <= limit {
        let normals = (0..vertices.len()).map(|j| facet_normal(&vertices, j)).collect();
        out.push((axis, normals));
        return;
    }
    let d = vertices.len();
    let mut best = (f64::INFINITY, 0, 1);
    for i in 0..d {
        for j in i + 1..d {
            let c = dot(&vertices[i], &vertices[j]);
            if c < best.0 {
                best = (c, i, j);
            }
        }
    }
    let (_, i, j) = best;
    let mid: Vec<f64> = vertices[i].iter().zip(&vertices[j]).map(|(a, b)| a + b).collect();
    let mid = normalized(&mid);
    let mut a = vertices.clone();
    a[i] = mid.clone();
    let mut b = vertices;
    b[j] = mid;
    bisect(a, limit, out);
    bisect(b, limit, out);
}

/// Inward unit normal of the facet opposite vertex `skip`. The spanning
/// vertices are put in a canonical order first so that two cones sharing the
/// facet compute bit-identical (up to sign) normals.
fn facet_normal(vertices: &[Vec<f64>], skip: usize) -> Vec<f64> {
    let d = vertices.len();
    let mut span: Vec<&Vec<f64>> = vertices
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, v)| v)
        .collect();
    span.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    });
    // Generalized cross product: cofactor expansion along a virtual first row.
    let mut n = vec![0.0; d];
    for (col, out) in n.iter_mut().enumerate() {
        let minor = DMatrix::from_fn(d - 1, d - 1, |r, c| {
            let c = if c >= col { c + 1 } else { c };
            span[r][c]
        });
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        *out = sign * minor.determinant();
    }
    let mut n = normalized(&n);
    if dot(&n, &vertices[skip]) < 0.0 {
        n = negate(&n);
    }
    n.iter().map(|x| x + 0.0).collect()
}
