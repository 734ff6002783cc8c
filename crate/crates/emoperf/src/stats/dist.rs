//! Student t tail areas via the regularized incomplete beta function.
//!
//! The continued fraction is evaluated with the modified Lentz scheme, which
//! converges to machine precision for every (a, b, x) this crate needs; the
//! test suite pins the absolute CDF error below 1e-10 against closed forms
//! and numeric integration of the density.

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // reflection: gamma(x) gamma(1-x) = pi / sin(pi x)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return h;
        }
    }
    // the fraction converges in well under 300 terms for all df >= 1
    h
}

/// Regularized incomplete beta function I_x(a, b) for a, b > 0 and x in [0, 1].
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "reg_inc_beta requires a, b > 0");
    assert!((0.0..=1.0).contains(&x), "reg_inc_beta requires x in [0,1], got {x}");
    if x == 0.0 {
        return 0.0;
    }
    if x == 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}

/// CDF of the Student t distribution with `df` degrees of freedom.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "t_cdf requires df > 0");
    if t == 0.0 {
        return 0.5;
    }
    let tail = 0.5 * reg_inc_beta(0.5 * df, 0.5, df / (df + t * t));
    if t > 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-sided p-value for a t statistic with `df` degrees of freedom:
/// P(|T| >= |t|).
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    assert!(df > 0.0, "t_two_sided_p requires df > 0");
    if !t.is_finite() {
        return 0.0;
    }
    reg_inc_beta(0.5 * df, 0.5, df / (df + t * t))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_density(t: f64, df: f64) -> f64 {
        let c = ln_gamma((df + 1.0) / 2.0)
            - ln_gamma(df / 2.0)
            - 0.5 * (df * std::f64::consts::PI).ln();
        (c - 0.5 * (df + 1.0) * (1.0 + t * t / df).ln()).exp()
    }

    // adaptive Simpson quadrature, the independent route to the CDF
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, eps: f64, depth: u32) -> f64 {
        let c = 0.5 * (a + b);
        let h = b - a;
        let fa = f(a);
        let fb = f(b);
        let fc = f(c);
        let whole = h / 6.0 * (fa + 4.0 * fc + fb);
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fb: f64,
            fc: f64,
            whole: f64,
            eps: f64,
            depth: u32,
        ) -> f64 {
            let c = 0.5 * (a + b);
            let d = 0.5 * (a + c);
            let e = 0.5 * (c + b);
            let fd = f(d);
            let fe = f(e);
            let left = (c - a) / 6.0 * (fa + 4.0 * fd + fc);
            let right = (b - c) / 6.0 * (fc + 4.0 * fe + fb);
            if depth == 0 || (left + right - whole).abs() < 15.0 * eps {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, c, fa, fc, fd, left, eps / 2.0, depth - 1)
                + rec(f, c, b, fc, fb, fe, right, eps / 2.0, depth - 1)
        }
        rec(f, a, b, fa, fb, fc, whole, eps, depth)
    }

    fn t_cdf_by_quadrature(t: f64, df: f64) -> f64 {
        // integrate the density from 0 to |t| and use symmetry about 0
        let half = simpson(&|x| t_density(x, df), 0.0, t.abs(), 1e-12, 40);
        if t >= 0.0 {
            0.5 + half
        } else {
            0.5 - half
        }
    }

    #[test]
    fn cdf_matches_cauchy_closed_form() {
        // df = 1 is the Cauchy distribution: F(t) = 1/2 + atan(t)/pi
        for &t in &[-5.0f64, -1.3, -0.2, 0.0, 0.7, 2.9, 10.0] {
            let exact = 0.5 + t.atan() / std::f64::consts::PI;
            let got = t_cdf(t, 1.0);
            assert!(
                (got - exact).abs() < 1e-12,
                "df=1 t={t}: got {got}, exact {exact}"
            );
        }
    }

    #[test]
    fn cdf_matches_df2_closed_form() {
        // df = 2: F(t) = 1/2 + t / (2 sqrt(2 + t^2))
        for &t in &[-4.0f64, -0.8, 0.3, 1.5, 6.0] {
            let exact = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
            let got = t_cdf(t, 2.0);
            assert!(
                (got - exact).abs() < 1e-12,
                "df=2 t={t}: got {got}, exact {exact}"
            );
        }
    }

    #[test]
    fn cdf_matches_quadrature_to_1e10() {
        for &df in &[1.0, 2.0, 4.0, 6.0, 17.0, 100.0, 265.0] {
            for &t in &[-8.0, -2.5, -1.0, -0.1, 0.0, 0.4, 1.96, 3.3, 7.0] {
                let got = t_cdf(t, df);
                let oracle = t_cdf_by_quadrature(t, df);
                assert!(
                    (got - oracle).abs() < 1e-10,
                    "df={df} t={t}: got {got}, quadrature {oracle}"
                );
            }
        }
    }

    #[test]
    fn two_sided_p_basics() {
        assert!((t_two_sided_p(0.0, 10.0) - 1.0).abs() < 1e-15);
        // symmetry in the sign of t
        let a = t_two_sided_p(2.3, 7.0);
        let b = t_two_sided_p(-2.3, 7.0);
        assert_eq!(a, b);
        // consistency with the CDF
        let df = 4.0;
        let t = 1.7;
        let via_cdf = 2.0 * (1.0 - t_cdf(t, df));
        assert!((a > 0.0) && (a < 1.0));
        assert!((t_two_sided_p(t, df) - via_cdf).abs() < 1e-12);
        assert_eq!(t_two_sided_p(f64::INFINITY, 5.0), 0.0);
    }

    #[test]
    fn ln_gamma_known_values() {
        // gamma(1/2) = sqrt(pi), gamma(5) = 24
        assert!((ln_gamma(0.5) - 0.5 * std::f64::consts::PI.ln()).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24.0f64.ln()).abs() < 1e-12);
    }
}
