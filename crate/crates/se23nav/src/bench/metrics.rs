//! Error metrics: per-epoch records built from the geometric error
//! definitions, plus series summaries (steady-state RMSE, log-error slopes).

use crate::geometric::geometric_errors;
use crate::lie::{ExtendedPose, Rotation};
use crate::world::LandmarkSet;
use nalgebra::Vector3;

/// Normalized attitude distance |R̃|_I = √(tr(I − R̃)/4) ∈ [0, 1]
/// (0 at identity, 1 at a half turn); equals sin(θ/2) for rotation angle θ.
pub fn attitude_distance(r_tilde: &Rotation) -> f64 {
    let tr = r_tilde.matrix().trace();
    (((3.0 - tr) / 4.0).max(0.0)).sqrt().min(1.0)
}

/// Rotation angle in degrees recovered from [`attitude_distance`].
pub fn attitude_degrees(dist: f64) -> f64 {
    2.0 * dist.clamp(0.0, 1.0).asin().to_degrees()
}

/// One epoch of estimation errors. `pos_err`/`vel_err` are the geometric
/// errors p̃ = p − R̃p̂ − (I − R̃)p_c and ṽ = v − R̃v̂ used by the stability
/// analysis; `dpos`/`dvel` are the naive differences p − p̂ and v − v̂ kept
/// as auxiliary columns (the two coincide as the attitude error vanishes).
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub t: f64,
    /// |R̃|_I ∈ [0, 1].
    pub att_err: f64,
    pub pos_err: Vector3<f64>,
    pub vel_err: Vector3<f64>,
    pub dpos: Vector3<f64>,
    pub dvel: Vector3<f64>,
    /// tr(P) of the observer's covariance, when it carries one.
    pub trace_p: Option<f64>,
}

impl ErrorRecord {
    pub fn pos_norm(&self) -> f64 {
        self.pos_err.norm()
    }

    pub fn vel_norm(&self) -> f64 {
        self.vel_err.norm()
    }
}

/// Evaluates all error columns for one (truth, estimate) pair.
pub fn compute_errors(
    t: f64,
    truth: &ExtendedPose,
    est: &ExtendedPose,
    landmarks: &LandmarkSet,
    trace_p: Option<f64>,
) -> ErrorRecord {
    let p_c = landmarks.centroid();
    let (r_tilde, v_tilde, p_tilde) = geometric_errors(truth, est, &p_c);
    ErrorRecord {
        t,
        att_err: attitude_distance(&r_tilde),
        pos_err: p_tilde,
        vel_err: v_tilde,
        dpos: truth.pos - est.pos,
        dvel: truth.vel - est.vel,
        trace_p,
    }
}

/// Least-squares slope of ln(v) against t, ignoring entries at or below
/// `floor` (converged-to-machine-noise samples would otherwise dominate the
/// fit). NaN when fewer than two usable samples remain.
pub fn log_slope(series: &[(f64, f64)], floor: f64) -> f64 {
    let pts: Vec<(f64, f64)> =
        series.iter().filter(|(_, v)| *v > floor).map(|&(t, v)| (t, v.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let tbar = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let ybar = pts.iter().map(|(_, y)| y).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, y) in &pts {
        num += (t - tbar) * (y - ybar);
        den += (t - tbar) * (t - tbar);
    }
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Summary of one observer run. RMSE values cover the steady-state window
/// (the trailing `window_frac` of the series); the sums of squares and the
/// sample count are kept so Monte-Carlo aggregates can be recomposed
/// exactly. Slopes are fit over the whole series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesSummary {
    pub final_att: f64,
    pub final_pos: f64,
    pub final_vel: f64,
    pub rmse_att_deg: f64,
    pub rmse_pos: f64,
    pub rmse_vel: f64,
    pub slope_att: f64,
    pub slope_pos: f64,
    pub slope_vel: f64,
    pub window_n: usize,
    pub ss_att_deg2: f64,
    pub ss_pos2: f64,
    pub ss_vel2: f64,
}

/// Numeric floor for the log-slope fits.
pub const SLOPE_FLOOR: f64 = 1e-16;

pub fn summarize(records: &[ErrorRecord], window_frac: f64) -> SeriesSummary {
    assert!(!records.is_empty(), "cannot summarize an empty series");
    assert!((0.0..=1.0).contains(&window_frac));
    let last = records.last().unwrap();
    let start = ((records.len() as f64) * (1.0 - window_frac)).floor() as usize;
    let window = &records[start.min(records.len() - 1)..];

    let mut ss_att = 0.0;
    let mut ss_pos = 0.0;
    let mut ss_vel = 0.0;
    for r in window {
        let deg = attitude_degrees(r.att_err);
        ss_att += deg * deg;
        ss_pos += r.pos_err.norm_squared();
        ss_vel += r.vel_err.norm_squared();
    }
    let n = window.len() as f64;

    let att_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.att_err)).collect();
    let pos_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.pos_norm())).collect();
    let vel_series: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.vel_norm())).collect();

    SeriesSummary {
        final_att: last.att_err,
        final_pos: last.pos_norm(),
        final_vel: last.vel_norm(),
        rmse_att_deg: (ss_att / n).sqrt(),
        rmse_pos: (ss_pos / n).sqrt(),
        rmse_vel: (ss_vel / n).sqrt(),
        slope_att: log_slope(&att_series, SLOPE_FLOOR),
        slope_pos: log_slope(&pos_series, SLOPE_FLOOR),
        slope_vel: log_slope(&vel_series, SLOPE_FLOOR),
        window_n: window.len(),
        ss_att_deg2: ss_att,
        ss_pos2: ss_pos,
        ss_vel2: ss_vel,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::exp_so3;
    use crate::scenario::Scenario;
    use approx::assert_abs_diff_eq;

    #[test]
    fn perfect_estimate_has_zero_errors() {
        let landmarks = Scenario::default_landmarks();
        let truth = ExtendedPose::new(
            exp_so3(&Vector3::new(0.3, -0.2, 0.9)),
            Vector3::new(1.0, 2.0, 3.0),
            Vector3::new(-4.0, 5.0, 6.0),
        );
        let rec = compute_errors(1.5, &truth, &truth, &landmarks, None);
        assert_eq!(rec.att_err, 0.0);
        assert!(rec.pos_norm() < 1e-14 && rec.vel_norm() < 1e-14);
        assert!(rec.dpos.norm() == 0.0 && rec.dvel.norm() == 0.0);
    }

    #[test]
    fn attitude_distance_matches_half_angle_sine() {
        for angle in [0.0, 0.3, 1.0, 2.0, std::f64::consts::PI] {
            let r = exp_so3(&(Vector3::new(0.0, 1.0, 0.0) * angle));
            assert_abs_diff_eq!(attitude_distance(&r), (angle / 2.0).sin(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(attitude_degrees((0.25_f64).to_radians().sin()), 0.5, epsilon = 1e-9);
    }

    #[test]
    fn aligned_attitudes_reduce_geometric_to_naive_error() {
        let landmarks = Scenario::default_landmarks();
        let rot = exp_so3(&Vector3::new(0.1, 0.2, 0.3));
        let truth = ExtendedPose::new(rot, Vector3::new(1.0, 0.0, 0.0), Vector3::new(2.0, -1.0, 3.0));
        let est = ExtendedPose::new(rot, Vector3::new(0.5, 0.1, 0.0), Vector3::new(2.5, -1.2, 2.0));
        let rec = compute_errors(0.0, &truth, &est, &landmarks, Some(4.2));
        // R̃ = I collapses p̃ and ṽ to plain differences regardless of p_c.
        assert_abs_diff_eq!(rec.pos_err, rec.dpos, epsilon = 1e-13);
        assert_abs_diff_eq!(rec.vel_err, rec.dvel, epsilon = 1e-13);
        assert_eq!(rec.trace_p, Some(4.2));
    }

    #[test]
    fn log_slope_recovers_exponential_rate() {
        let series: Vec<(f64, f64)> =
            (0..100).map(|k| (k as f64 * 0.1, 3.0 * (-0.7 * k as f64 * 0.1).exp())).collect();
        assert_abs_diff_eq!(log_slope(&series, 0.0), -0.7, epsilon = 1e-10);
        // Samples at the floor are excluded rather than poisoning the fit.
        let mut with_floor = series.clone();
        with_floor.extend((100..200).map(|k| (k as f64 * 0.1, 1e-18)));
        assert_abs_diff_eq!(log_slope(&with_floor, 1e-16), -0.7, epsilon = 1e-10);
        assert!(log_slope(&[(0.0, 1e-18)], 1e-16).is_nan());
    }

    #[test]
    fn summary_window_and_pooled_sums() {
        let landmarks = Scenario::default_landmarks();
        let truth = ExtendedPose::identity();
        let records: Vec<ErrorRecord> = (0..10)
            .map(|k| {
                let est = ExtendedPose::new(
                    Rotation::identity(),
                    Vector3::zeros(),
                    Vector3::new(k as f64, 0.0, 0.0),
                );
                compute_errors(k as f64, &truth, &est, &landmarks, None)
            })
            .collect();
        let s = summarize(&records, 0.5);
        // Trailing half: positions 5..9 → mean square = (25+36+49+64+81)/5.
        assert_eq!(s.window_n, 5);
        assert_abs_diff_eq!(s.rmse_pos, (255.0_f64 / 5.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.ss_pos2, 255.0, epsilon = 1e-12);
        assert_eq!(s.final_pos, 9.0);
    }
}
