//! Sign-change bracketing and bisection for scalar functions.
//!
//! Signs are compared strictly: an endpoint where `f` is exactly zero does
//! not count as a sign change. Likelihood derivatives underflow to exact
//! zeros far away from the data, and those flat regions must not be mistaken
//! for roots.

/// Stopping rule for [`bisect`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bisection {
    /// Stop once the half-width of the bracket is below this.
    pub x_tol: f64,
    /// Stop once `|f(mid)|` is below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final bracket.
    pub bracket: (f64, f64),
}

pub fn opposite_signs(fa: f64, fb: f64) -> bool {
    (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0)
}

/// Bisection on `[a, b]` given `fa = f(a)` and `fb = f(b)` with opposite
/// signs. Returns `None` when the endpoints do not bracket a sign change.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    fb: f64,
    rule: &Bisection,
) -> Option<Root> {
    if !opposite_signs(fa, fb) {
        return None;
    }
    if a > b {
        std::mem::swap(&mut a, &mut b);
        fa = fb;
    }
    let mut mid = 0.5 * (a + b);
    let mut fmid = f(mid);
    for iteration in 1..=rule.max_iter {
        if fmid == 0.0 || fmid.abs() <= rule.f_tol || 0.5 * (b - a) <= rule.x_tol {
            return Some(Root {
                x: mid,
                f: fmid,
                iterations: iteration,
                converged: true,
                bracket: (a, b),
            });
        }
        if opposite_signs(fa, fmid) {
            b = mid;
        } else {
            a = mid;
            fa = fmid;
        }
        let next = 0.5 * (a + b);
        if next == mid {
            // bracket collapsed to adjacent floats
            return Some(Root {
                x: mid,
                f: fmid,
                iterations: iteration,
                converged: true,
                bracket: (a, b),
            });
        }
        mid = next;
        fmid = f(mid);
    }
    Some(Root {
        x: mid,
        f: fmid,
        iterations: rule.max_iter,
        converged: false,
        bracket: (a, b),
    })
}

/// Outcome of [`expand_symmetric`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Expansion {
    Found(Bracket),
    NotFound { expansions: usize },
}

/// A sign-change bracket `[a, b]` together with the previous (same-sign)
/// bracket `[inner_a, inner_b]` it grew from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub a: f64,
    pub b: f64,
    pub fa: f64,
    pub fb: f64,
    pub inner_a: f64,
    pub inner_b: f64,
    pub f_inner_a: f64,
    pub f_inner_b: f64,
    pub expansions: usize,
}

/// Which sign patterns end the bracket expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignChange {
    /// Any strict sign change.
    #[default]
    Any,
    /// `f(a) > 0 > f(b)`: the bracket holds a local maximum of the
    /// antiderivative.
    Descending,
}

impl SignChange {
    pub fn accepts(&self, fa: f64, fb: f64) -> bool {
        match self {
            SignChange::Any => opposite_signs(fa, fb),
            SignChange::Descending => fa > 0.0 && fb < 0.0,
        }
    }
}

/// Grows `[center - k*step, center + k*step]`, clipped to `[lo, hi]`, until
/// the endpoint values show the requested sign change.
///
/// A probe where `f` is exactly zero leaves that side's endpoint at the last
/// point with a nonzero value, so the returned bracket always has nonzero
/// endpoint values. The inner bracket may still hold a zero at `center`.
pub fn expand_symmetric<F: Fn(f64) -> f64>(
    f: F,
    center: f64,
    step: f64,
    max_expansions: usize,
    lo: f64,
    hi: f64,
    want: SignChange,
) -> Expansion {
    let f_center = f(center);
    let (mut a, mut b, mut fa, mut fb) = (center, center, f_center, f_center);
    let (mut probe_a, mut probe_b) = (center, center);
    for k in 1..=max_expansions {
        let (pa, pb, fpa, fpb) = (a, b, fa, fb);
        let next_a = (center - k as f64 * step).max(lo);
        let next_b = (center + k as f64 * step).min(hi);
        if next_a == probe_a && next_b == probe_b {
            return Expansion::NotFound { expansions: k };
        }
        if next_a != probe_a {
            probe_a = next_a;
            let v = f(probe_a);
            if v != 0.0 {
                a = probe_a;
                fa = v;
            }
        }
        if next_b != probe_b {
            probe_b = next_b;
            let v = f(probe_b);
            if v != 0.0 {
                b = probe_b;
                fb = v;
            }
        }
        if want.accepts(fa, fb) {
            return Expansion::Found(Bracket {
                a,
                b,
                fa,
                fb,
                inner_a: pa,
                inner_b: pb,
                f_inner_a: fpa,
                f_inner_b: fpb,
                expansions: k,
            });
        }
    }
    Expansion::NotFound {
        expansions: max_expansions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULE: Bisection = Bisection {
        x_tol: 1e-13,
        f_tol: 0.0,
        max_iter: 200,
    };

    #[test]
    fn bisect_finds_sqrt2() {
        let f = |x: f64| x * x - 2.0;
        let r = bisect(f, 0.0, 2.0, f(0.0), f(2.0), &RULE).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn bisect_requires_sign_change() {
        let f = |x: f64| x * x + 1.0;
        assert!(bisect(f, -1.0, 1.0, f(-1.0), f(1.0), &RULE).is_none());
        // exact zero endpoint is not a strict sign change
        assert!(bisect(|x| x, 0.0, 1.0, 0.0, 1.0, &RULE).is_none());
    }

    #[test]
    fn bisect_iteration_cap() {
        let rule = Bisection {
            x_tol: 0.0,
            f_tol: 0.0,
            max_iter: 5,
        };
        let f = |x: f64| x - 0.3;
        let r = bisect(f, 0.0, 1.0, f(0.0), f(1.0), &rule).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn expansion_records_inner_bracket() {
        let f = |x: f64| x - 1.3;
        match expand_symmetric(f, 0.0, 0.5, 100, -10.0, 10.0, SignChange::Any) {
            Expansion::Found(br) => {
                assert_eq!(br.expansions, 3);
                assert_eq!((br.a, br.b), (-1.5, 1.5));
                assert_eq!((br.inner_a, br.inner_b), (-1.0, 1.0));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expansion_clipped_and_exhausted() {
        let f = |x: f64| x * x + 1.0;
        assert_eq!(
            expand_symmetric(f, 0.0, 1.0, 100, -2.0, 2.0, SignChange::Any),
            Expansion::NotFound { expansions: 3 }
        );
        assert_eq!(
            expand_symmetric(f, 0.0, 1.0, 2, -20.0, 20.0, SignChange::Any),
            Expansion::NotFound { expansions: 2 }
        );
        match expand_symmetric(|x| x, 0.0, 1.0, 2, -1.0, 1.0, SignChange::Any) {
            Expansion::Found(br) => assert_eq!((br.a, br.b), (-1.0, 1.0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_zero_region_is_not_a_root() {
        // zero for x < 0, positive after 2, negative in between
        let f = |x: f64| if x < 0.0 { 0.0 } else { x - 2.0 };
        match expand_symmetric(f, 1.0, 0.25, 100, -5.0, 5.0, SignChange::Any) {
            Expansion::Found(br) => {
                assert_eq!(br.a, 0.0);
                assert_eq!(br.b, 2.25);
                assert!(opposite_signs(br.f_inner_b, br.fb));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn descending_skips_ascending_crossings() {
        // ascending root at 0, descending roots at -1.5 and 2
        let f = |x: f64| -(x + 1.5) * x * (x - 2.0);
        match expand_symmetric(f, 0.1, 0.5, 100, -10.0, 10.0, SignChange::Descending) {
            Expansion::Found(br) => {
                assert!(br.fa > 0.0 && br.fb < 0.0);
                assert!(br.a < -1.5 || br.b > 2.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
