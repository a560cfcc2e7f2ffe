//! Feasible sets: membership, projection, linear minimization and sampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dot, norm2, Point};

/// Default membership tolerance.
pub const TOL_FEAS: f64 = 1e-12;

/// Half-width of the cube used to sample points of an unbounded set.
pub const WHOLE_SPACE_SAMPLE_RADIUS: f64 = 2.0;

/// Largest dimension for which [`FeasibleSet::vertices`] enumerates extreme points.
pub const MAX_VERTEX_DIM: usize = 20;

/// A closed convex set `Q`.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// `R^n`.
    WholeSpace(usize),
    /// Coordinate-wise bounds `lower <= x <= upper`.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Probability simplex in `R^n`.
    Simplex(usize),
    /// Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// `Simplex(n1) x Simplex(n2)`.
    ProductOfSimplices(usize, usize),
    /// Cartesian product of arbitrary sets, coordinates concatenated.
    Product(Vec<FeasibleSet>),
}

/// A non-product factor of a set, borrowed.
#[derive(Debug, Clone, Copy)]
pub enum Leaf<'a> {
    /// `R^n`.
    Whole(usize),
    /// Coordinate bounds.
    Box(&'a [f64], &'a [f64]),
    /// Probability simplex.
    Simplex(usize),
    /// Euclidean ball.
    Ball(&'a [f64], f64),
}

impl Leaf<'_> {
    /// Dimension of the factor.
    pub fn dim(&self) -> usize {
        match self {
            Leaf::Whole(n) | Leaf::Simplex(n) => *n,
            Leaf::Box(l, _) => l.len(),
            Leaf::Ball(c, _) => c.len(),
        }
    }
}

impl FeasibleSet {
    /// Box with the same bounds on every coordinate.
    pub fn uniform_box(n: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new_box(vec![lower; n], vec![upper; n])
    }

    /// Box with per-coordinate bounds.
    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(&upper, lower.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box needs lower <= upper".into()));
        }
        Ok(Self::Box { lower, upper })
    }

    /// Euclidean ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument("ball radius must be positive".into()));
        }
        Ok(Self::Ball { center, radius })
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::WholeSpace(n) | Self::Simplex(n) => *n,
            Self::Box { lower, .. } => lower.len(),
            Self::Ball { center, .. } => center.len(),
            Self::ProductOfSimplices(a, b) => a + b,
            Self::Product(parts) => parts.iter().map(Self::dim).sum(),
        }
    }

    /// Whether the set is bounded.
    pub fn is_bounded(&self) -> bool {
        self.leaves().iter().all(|(_, l)| !matches!(l, Leaf::Whole(_)))
    }

    /// Factors with their coordinate offsets.
    pub fn leaves(&self) -> Vec<(usize, Leaf<'_>)> {
        let mut out = Vec::new();
        self.collect_leaves(0, &mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, offset: usize, out: &mut Vec<(usize, Leaf<'a>)>) {
        match self {
            Self::WholeSpace(n) => out.push((offset, Leaf::Whole(*n))),
            Self::Box { lower, upper } => out.push((offset, Leaf::Box(lower, upper))),
            Self::Simplex(n) => out.push((offset, Leaf::Simplex(*n))),
            Self::Ball { center, radius } => out.push((offset, Leaf::Ball(center, *radius))),
            Self::ProductOfSimplices(a, b) => {
                out.push((offset, Leaf::Simplex(*a)));
                out.push((offset + a, Leaf::Simplex(*b)));
            }
            Self::Product(parts) => {
                let mut off = offset;
                for p in parts {
                    p.collect_leaves(off, out);
                    off += p.dim();
                }
            }
        }
    }

    /// Membership up to `tol`.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        if x.len() != self.dim() || !x.iter().all(|v| v.is_finite()) {
            return false;
        }
        self.leaves().into_iter().all(|(off, leaf)| {
            let xs = &x[off..off + leaf.dim()];
            match leaf {
                Leaf::Whole(_) => true,
                Leaf::Box(l, u) => xs
                    .iter()
                    .zip(l.iter().zip(u))
                    .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol),
                Leaf::Simplex(_) => {
                    xs.iter().all(|v| *v >= -tol) && (xs.iter().sum::<f64>() - 1.0).abs() <= tol
                }
                Leaf::Ball(c, r) => {
                    let d: f64 = xs.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    d.sqrt() <= r + tol
                }
            }
        })
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Point> {
        check_dim(x, self.dim())?;
        let mut out = x.to_vec();
        for (off, leaf) in self.leaves() {
            let xs = &mut out[off..off + leaf.dim()];
            match leaf {
                Leaf::Whole(_) => {}
                Leaf::Box(l, u) => {
                    for ((v, lo), hi) in xs.iter_mut().zip(l).zip(u) {
                        *v = v.clamp(*lo, *hi);
                    }
                }
                Leaf::Simplex(_) => {
                    let p = project_simplex(xs);
                    xs.copy_from_slice(&p);
                }
                Leaf::Ball(c, r) => {
                    let d: f64 = xs
                        .iter()
                        .zip(c)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    if d > r {
                        for (v, ci) in xs.iter_mut().zip(c) {
                            *v = ci + (*v - ci) * r / d;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Linear minimization oracle: a minimizer of `<g, x>` over the set.
    pub fn lmo(&self, g: &[f64]) -> Result<Point> {
        check_dim(g, self.dim())?;
        let mut out = vec![0.0; g.len()];
        for (off, leaf) in self.leaves() {
            let gs = &g[off..off + leaf.dim()];
            let xs = &mut out[off..off + leaf.dim()];
            match leaf {
                Leaf::Whole(_) => {
                    return Err(Error::UnsupportedSet(
                        "linear minimization over an unbounded set".into(),
                    ))
                }
                Leaf::Box(l, u) => {
                    for i in 0..gs.len() {
                        xs[i] = if gs[i] > 0.0 { l[i] } else { u[i] };
                    }
                }
                Leaf::Simplex(_) => {
                    let mut best = 0;
                    for i in 1..gs.len() {
                        if gs[i] < gs[best] {
                            best = i;
                        }
                    }
                    xs[best] = 1.0;
                }
                Leaf::Ball(c, r) => {
                    let gn = norm2(gs);
                    for i in 0..gs.len() {
                        xs[i] = if gn > 0.0 { c[i] - r * gs[i] / gn } else { c[i] };
                    }
                }
            }
        }
        Ok(out)
    }

    /// `min_{x in Q} <g, x>`.
    pub fn support_min(&self, g: &[f64]) -> Result<f64> {
        Ok(dot(g, &self.lmo(g)?))
    }

    /// Extreme points of a polytope, for dimensions up to [`MAX_VERTEX_DIM`].
    pub fn vertices(&self) -> Result<Vec<Point>> {
        if self.dim() > MAX_VERTEX_DIM {
            return Err(Error::UnsupportedSet(format!(
                "vertex enumeration above dimension {MAX_VERTEX_DIM}"
            )));
        }
        let mut acc: Vec<Point> = vec![Vec::new()];
        for (_, leaf) in self.leaves() {
            let verts: Vec<Point> = match leaf {
                Leaf::Whole(_) | Leaf::Ball(..) => {
                    return Err(Error::UnsupportedSet("set is not a polytope".into()))
                }
                Leaf::Simplex(n) => (0..n)
                    .map(|i| {
                        let mut e = vec![0.0; n];
                        e[i] = 1.0;
                        e
                    })
                    .collect(),
                Leaf::Box(l, u) => {
                    let n = l.len();
                    (0..1usize << n)
                        .map(|mask| {
                            (0..n)
                                .map(|i| if mask >> i & 1 == 1 { u[i] } else { l[i] })
                                .collect()
                        })
                        .collect()
                }
            };
            let mut next = Vec::with_capacity(acc.len() * verts.len());
            for a in &acc {
                for v in &verts {
                    let mut p = a.clone();
                    p.extend_from_slice(v);
                    next.push(p);
                }
            }
            acc = next;
        }
        Ok(acc)
    }

    /// A random point of the set; unbounded factors draw from a cube of
    /// half-width [`WHOLE_SPACE_SAMPLE_RADIUS`].
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        let mut out = vec![0.0; self.dim()];
        for (off, leaf) in self.leaves() {
            let xs = &mut out[off..off + leaf.dim()];
            match leaf {
                Leaf::Whole(_) => {
                    for v in xs.iter_mut() {
                        *v = rng.gen_range(-WHOLE_SPACE_SAMPLE_RADIUS..=WHOLE_SPACE_SAMPLE_RADIUS);
                    }
                }
                Leaf::Box(l, u) => {
                    for i in 0..xs.len() {
                        xs[i] = if l[i] < u[i] {
                            rng.gen_range(l[i]..=u[i])
                        } else {
                            l[i]
                        };
                    }
                }
                Leaf::Simplex(_) => {
                    // Normalized exponentials are uniform on the simplex.
                    for v in xs.iter_mut() {
                        *v = -(1.0 - rng.gen::<f64>()).ln() + 1e-300;
                    }
                    let s: f64 = xs.iter().sum();
                    for v in xs.iter_mut() {
                        *v /= s;
                    }
                }
                Leaf::Ball(c, r) => {
                    let n = c.len();
                    let mut dir: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
                    let dn = norm2(&dir).max(1e-300);
                    let rad = r * rng.gen::<f64>().powf(1.0 / n as f64);
                    for (d, ci) in dir.iter_mut().zip(c) {
                        *d = ci + rad * *d / dn;
                    }
                    xs.copy_from_slice(&dir);
                }
            }
        }
        out
    }

    /// Parses a set descriptor; `dim` supplies the dimension when the text omits it.
    ///
    /// Accepted forms: `whole:n`, `simplex:n`, `box:[lo,hi]^n`, `ball:c,r` or
    /// `ball:c,r^n` (center `c` on every coordinate), `simplices:n1,n2`.
    pub fn parse_with_dim(text: &str, dim: Option<usize>) -> Result<Self> {
        let text = text.trim();
        let (kind, rest) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("set descriptor `{text}` has no `:`")))?;
        let bad = || Error::Parse(format!("malformed set descriptor `{text}`"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
        let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
        let split_dim = |s: &str| -> Result<(String, usize)> {
            match s.rsplit_once('^') {
                Some((body, n)) => Ok((body.to_string(), int(n)?)),
                None => Ok((s.to_string(), dim.ok_or_else(bad)?)),
            }
        };
        let set = match kind.trim() {
            "whole" => Self::WholeSpace(int(rest)?),
            "simplex" => Self::Simplex(int(rest)?),
            "simplices" => {
                let (a, b) = rest.split_once(',').ok_or_else(bad)?;
                Self::ProductOfSimplices(int(a)?, int(b)?)
            }
            "box" => {
                let (body, n) = split_dim(rest)?;
                let inner = body
                    .trim()
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(bad)?;
                let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
                Self::uniform_box(n, num(lo)?, num(hi)?)?
            }
            "ball" => {
                let (body, n) = split_dim(rest)?;
                let (c, r) = body.split_once(',').ok_or_else(bad)?;
                Self::ball(vec![num(c)?; n], num(r)?)?
            }
            _ => return Err(bad()),
        };
        if set.dim() == 0 {
            return Err(Error::Parse(format!("set `{text}` has dimension 0")));
        }
        if let Some(n) = dim {
            if set.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: set.dim(),
                });
            }
        }
        Ok(set)
    }
}

impl FromStr for FeasibleSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with_dim(s, None)
    }
}

impl fmt::Display for FeasibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let uniform = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        match self {
            Self::WholeSpace(n) => write!(f, "whole:{n}"),
            Self::Simplex(n) => write!(f, "simplex:{n}"),
            Self::ProductOfSimplices(a, b) => write!(f, "simplices:{a},{b}"),
            Self::Box { lower, upper } if !lower.is_empty() && uniform(lower) && uniform(upper) => {
                write!(f, "box:[{},{}]^{}", lower[0], upper[0], lower.len())
            }
            Self::Box { lower, .. } => write!(f, "box:custom^{}", lower.len()),
            Self::Ball { center, radius } if !center.is_empty() && uniform(center) => {
                write!(f, "ball:{},{}^{}", center[0], radius, center.len())
            }
            Self::Ball { center, .. } => write!(f, "ball:custom^{}", center.len()),
            Self::Product(parts) => {
                let names: Vec<String> = parts.iter().map(|p| p.to_string()).collect();
                write!(f, "product({})", names.join(" x "))
            }
        }
    }
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Point {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cum += ui;
        let t = (cum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Box-Muller standard normal draw.
pub(crate) fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parses_canonical_forms() {
        assert_eq!("simplex:5".parse::<FeasibleSet>().unwrap(), FeasibleSet::Simplex(5));
        assert_eq!(
            "box:[-1,1]^10".parse::<FeasibleSet>().unwrap(),
            FeasibleSet::uniform_box(10, -1.0, 1.0).unwrap()
        );
        assert_eq!(
            FeasibleSet::parse_with_dim("ball:0,1.0", Some(3)).unwrap(),
            FeasibleSet::ball(vec![0.0; 3], 1.0).unwrap()
        );
        assert!("ball:0,1.0".parse::<FeasibleSet>().is_err());
        assert!("cube:3".parse::<FeasibleSet>().is_err());
        for s in ["simplex:5", "box:[-1,1]^10", "ball:0,1^4", "whole:3", "simplices:2,3"] {
            let set: FeasibleSet = s.parse().unwrap();
            assert_eq!(set.to_string().parse::<FeasibleSet>().unwrap(), set);
        }
    }

    #[test]
    fn simplex_projection_matches_hand_values() {
        assert_eq!(project_simplex(&[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(project_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
        let p = project_simplex(&[1.0, 1.0, -5.0]);
        assert!((p[0] - 0.5).abs() < 1e-15 && p[2] == 0.0);
    }

    #[test]
    fn samples_lie_in_their_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sets = [
            FeasibleSet::Simplex(4),
            FeasibleSet::uniform_box(3, -1.0, 2.0).unwrap(),
            FeasibleSet::ball(vec![1.0, 1.0], 0.5).unwrap(),
            FeasibleSet::ProductOfSimplices(2, 3),
        ];
        for set in &sets {
            for _ in 0..200 {
                assert!(set.contains(&set.sample(&mut rng), 1e-12));
            }
        }
    }

    #[test]
    fn lmo_attains_vertex_minimum() {
        let set = FeasibleSet::ProductOfSimplices(2, 2);
        let g = [0.3, -0.1, 2.0, 1.0];
        let best = set
            .vertices()
            .unwrap()
            .iter()
            .map(|v| dot(&g, v))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(set.support_min(&g).unwrap(), best);
        assert!(FeasibleSet::WholeSpace(2).lmo(&[1.0, 0.0]).is_err());
    }
}
