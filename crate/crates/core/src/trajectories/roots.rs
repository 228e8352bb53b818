use super::poly::{taylor_shift, Polynomial};

/// Absolute time tolerance for reported roots and event merging.
pub const TIME_TOLERANCE: f64 = 1e-9;

const MAX_DEPTH: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Odd,
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub time: f64,
    pub parity: Parity,
}

/// Real roots inside a half-open interval `(t0, t1]`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootList {
    pub roots: Vec<Root>,
}

impl RootList {
    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.roots.iter().map(|r| r.time).collect()
    }

    /// Roots at which the sign actually changes.
    pub fn odd(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots
            .iter()
            .filter(|r| r.parity == Parity::Odd)
            .map(|r| r.time)
    }
}

/// Isolates the real roots of `p` in `(t0, t1]`.
///
/// Intervals are split recursively until Descartes' rule of signs (applied
/// to the polynomial mapped onto `(0, ∞)`) reports at most one sign
/// variation; single roots are then refined by bisection down to adjacent
/// floating-point values. Clusters that never separate are reported once,
/// as an odd root if the sign changes across them and as an even root if the
/// polynomial only touches zero.
pub fn real_roots(p: &Polynomial, t0: f64, t1: f64) -> RootList {
    let mut out = Vec::new();
    if p.degree() == 0 || !(t0 < t1) {
        return RootList { roots: out };
    }
    let mut iso = Isolator {
        p,
        tol: TIME_TOLERANCE * p.scale().max(f64::MIN_POSITIVE),
        out: &mut out,
    };
    iso.isolate(t0, t1, 0);
    if p.eval(t1) == 0.0 {
        out.push(Root {
            time: t1,
            parity: parity_at(p, t1),
        });
    }
    RootList { roots: merge(out) }
}

fn merge(roots: Vec<Root>) -> Vec<Root> {
    let mut merged: Vec<Root> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if r.time - last.time <= 1e-12 * last.time.abs().max(1.0) => {
                last.parity = if last.parity == r.parity {
                    Parity::Even
                } else {
                    Parity::Odd
                };
            }
            _ => merged.push(r),
        }
    }
    merged
}

struct Isolator<'a> {
    p: &'a Polynomial,
    tol: f64,
    out: &'a mut Vec<Root>,
}

impl Isolator<'_> {
    fn isolate(&mut self, a: f64, b: f64, depth: usize) {
        let sa = side_sign(self.p, a, true);
        let sb = side_sign(self.p, b, false);
        let v = variations(self.p, a, b);
        if v == 0 && sa == sb {
            return;
        }
        if v == 1 && sa != sb {
            let t = refine(self.p, a, b, sa);
            self.push(t, Parity::Odd);
            return;
        }
        let mid = a + 0.5 * (b - a);
        if b - a <= 1e-12 * a.abs().max(1.0) || depth >= MAX_DEPTH || mid <= a || mid >= b {
            if sa != sb {
                let t = refine(self.p, a, b, sa);
                self.push(t, Parity::Odd);
            } else if v >= 2 && self.p.eval(mid).abs() <= self.tol {
                self.push(mid, Parity::Even);
            }
            return;
        }
        self.isolate(a, mid, depth + 1);
        if self.p.eval(mid) == 0.0 {
            self.push(mid, parity_at(self.p, mid));
        }
        self.isolate(mid, b, depth + 1);
    }

    fn push(&mut self, time: f64, parity: Parity) {
        self.out.push(Root { time, parity });
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign of `p` on `(x, x + ε)` for small `ε`.
pub(crate) fn sign_after(p: &Polynomial, x: f64) -> i8 {
    side_sign(p, x, true)
}

/// Sign of `p` immediately to the right (or left) of `x`.
fn side_sign(p: &Polynomial, x: f64, right: bool) -> i8 {
    let mut q = p.clone();
    let mut order = 0;
    loop {
        let s = sign(q.eval(x));
        if s != 0 || q.degree() == 0 {
            return if right || order % 2 == 0 { s } else { -s };
        }
        q = q.derivative();
        order += 1;
    }
}

fn parity_at(p: &Polynomial, x: f64) -> Parity {
    let mut q = p.derivative();
    let mut order = 1;
    while q.eval(x) == 0.0 && q.degree() > 0 {
        q = q.derivative();
        order += 1;
    }
    if order % 2 == 1 {
        Parity::Odd
    } else {
        Parity::Even
    }
}

/// Descartes bound on the number of roots in the open interval `(a, b)`.
fn variations(p: &Polynomial, a: f64, b: f64) -> usize {
    let mut c = p.shift_scale(a, b - a);
    c.reverse();
    taylor_shift(&mut c, 1.0);
    let mut count = 0;
    let mut last = 0i8;
    for &x in &c {
        let s = sign(x);
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    count
}

/// Bisection on a bracket whose right-of-`a` sign is `sa`, down to adjacent
/// doubles.
fn refine(p: &Polynomial, mut a: f64, mut b: f64, sa: i8) -> f64 {
    for _ in 0..2000 {
        let m = a + 0.5 * (b - a);
        if m <= a || m >= b {
            break;
        }
        let s = sign(p.eval(m));
        if s == 0 {
            return m;
        }
        if s == sa {
            a = m;
        } else {
            b = m;
        }
    }
    a + 0.5 * (b - a)
}
