//! Fixed-step classical Runge-Kutta integration on flat state vectors.

use std::ops::{Add, Mul};

/// Element type an [`Rk4`] integrator can advance.
pub trait OdeScalar: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>> OdeScalar for T {}

/// Reusable RK4 stepper with preallocated stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4<T> {
    k1: Vec<T>,
    k2: Vec<T>,
    k3: Vec<T>,
    k4: Vec<T>,
    tmp: Vec<T>,
}

impl<T: OdeScalar> Rk4<T> {
    pub fn new(dim: usize) -> Self {
        let z = vec![T::default(); dim];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    /// Advances `y` in place by `dt` under `dy/dt = f(t, y)`.
    pub fn step<F>(&mut self, y: &mut [T], t: f64, dt: f64, f: &mut F)
    where
        F: FnMut(f64, &[T], &mut [T]),
    {
        let (k1, k2, k3, k4, tmp) = (
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.tmp,
        );
        f(t, y, k1);
        for i in 0..y.len() {
            tmp[i] = y[i] + k1[i] * (0.5 * dt);
        }
        f(t + 0.5 * dt, tmp, k2);
        for i in 0..y.len() {
            tmp[i] = y[i] + k2[i] * (0.5 * dt);
        }
        f(t + 0.5 * dt, tmp, k3);
        for i in 0..y.len() {
            tmp[i] = y[i] + k3[i] * dt;
        }
        f(t + dt, tmp, k4);
        let w = dt / 6.0;
        for i in 0..y.len() {
            y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * w;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn exponential_decay_fourth_order() {
        let errs: Vec<f64> = [0.1, 0.05]
            .iter()
            .map(|&dt| {
                let mut y = vec![1.0f64];
                let mut rk = Rk4::new(1);
                let steps = (1.0 / dt) as usize;
                for s in 0..steps {
                    rk.step(&mut y, s as f64 * dt, dt, &mut |_, y, dy| dy[0] = -y[0]);
                }
                (y[0] - (-1.0f64).exp()).abs()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn complex_rotation_preserves_modulus() {
        let mut y = vec![Complex64::new(1.0, 0.0)];
        let mut rk = Rk4::new(1);
        for s in 0..1000 {
            rk.step(&mut y, s as f64 * 1e-3, 1e-3, &mut |_, y, dy| {
                dy[0] = y[0] * Complex64::new(0.0, -2.0)
            });
        }
        assert!((y[0].norm() - 1.0).abs() < 1e-12);
        assert!((y[0] - Complex64::new(0.0, -2.0).exp()).norm() < 1e-12);
    }
}
