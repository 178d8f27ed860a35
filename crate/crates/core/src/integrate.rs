//! Classical fourth-order Runge-Kutta with a fixed step.

use nalgebra::SVector;

/// One step of `x' = f(t, x)`. Errors raised by any stage evaluation abort
/// the step.
pub fn rk4_step<const N: usize, E>(
    f: &mut impl FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    t: f64,
    x: &SVector<f64, N>,
    h: f64,
) -> Result<SVector<f64, N>, E> {
    let half = 0.5 * h;
    let k1 = f(t, x)?;
    let k2 = f(t + half, &(x + half * k1))?;
    let k3 = f(t + half, &(x + half * k2))?;
    let k4 = f(t + h, &(x + h * k3))?;
    Ok(x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
}

/// Integrates from `t0` over `steps` steps of size `h`.
pub fn rk4_integrate<const N: usize, E>(
    f: &mut impl FnMut(f64, &SVector<f64, N>) -> Result<SVector<f64, N>, E>,
    t0: f64,
    x0: SVector<f64, N>,
    h: f64,
    steps: usize,
) -> Result<SVector<f64, N>, E> {
    let mut x = x0;
    for i in 0..steps {
        x = rk4_step(f, t0 + i as f64 * h, &x, h)?;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};
    use std::convert::Infallible;

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let x0 = Vector3::new(1.0, -2.0, 3.5);
        let mut f = |_t: f64, _x: &Vector3<f64>| Ok::<_, Infallible>(Vector3::zeros());
        assert_eq!(rk4_integrate(&mut f, 0.0, x0, 0.1, 50).unwrap(), x0);
    }

    #[test]
    fn linear_system_matches_matrix_exponential() {
        let a = Matrix3::new(-0.5, 1.0, 0.0, -1.0, -0.5, 0.3, 0.0, 0.2, -1.2);
        let x0 = Vector3::new(1.0, 0.5, -0.25);
        let mut f = |_t: f64, x: &Vector3<f64>| Ok::<_, Infallible>(a * x);
        let x1 = rk4_integrate(&mut f, 0.0, x0, 1e-3, 1000).unwrap();
        let exact = a.exp() * x0;
        assert!((x1 - exact).norm() < 1e-10, "{}", (x1 - exact).norm());
    }

    #[test]
    fn fourth_order_convergence() {
        // x' = -t x^2 with x(0) = 1 has solution 2 / (2 + t^2).
        let mut f = |t: f64, x: &SVector<f64, 1>| Ok::<_, Infallible>(SVector::<f64, 1>::new(-t * x[0] * x[0]));
        let exact = 2.0 / (2.0 + 4.0);
        let mut err = |n: usize| {
            let x = rk4_integrate(&mut f, 0.0, SVector::<f64, 1>::new(1.0), 2.0 / n as f64, n).unwrap();
            (x[0] - exact).abs()
        };
        let ratio = err(50) / err(100);
        assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn stage_errors_propagate() {
        let mut calls = 0;
        let mut f = |t: f64, x: &SVector<f64, 1>| {
            calls += 1;
            if t > 0.01 {
                Err("boundary")
            } else {
                Ok(*x)
            }
        };
        assert_eq!(rk4_step(&mut f, 0.0, &SVector::<f64, 1>::new(1.0), 0.1), Err("boundary"));
        assert_eq!(calls, 2);
    }
}
