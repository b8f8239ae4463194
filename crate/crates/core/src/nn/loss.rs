use ndarray::{Array1, Array2, Axis};

/// Per-row squared Euclidean distance `Σ_c (y_c - ŷ_c)^2`.
pub fn squared_error_rows(y: &Array2<f64>, y_hat: &Array2<f64>) -> Array1<f64> {
    (y_hat - y).mapv(|d| d * d).sum_axis(Axis(1))
}

/// Gradient of `scale · Σ_rows Σ_c (y_c - ŷ_c)^2` with respect to `ŷ`.
pub fn squared_error_grad(y: &Array2<f64>, y_hat: &Array2<f64>, scale: f64) -> Array2<f64> {
    (y_hat - y) * (2.0 * scale)
}
