//! Objective grasp-stability measures computed from contact reports.
//!
//! The grasp matrix maps stacked per-contact force coordinates (normal and
//! tangential, planar hard contact with friction) to the object wrench
//! `(f_x, f_y, torque_z)`. From its singular values come the minimum
//! singular value and the wrench-ellipsoid volume; contact geometry gives
//! the mean contact-to-centroid distance. Series are sampled on a stride
//! and differentiated by forward differences.

use serde::{Deserialize, Serialize};

use crate::env::{classify_outcome, is_success, ContactReport, Outcome, TrajectoryStep};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Vec2};
use crate::scalar::Real;

// ---------------------------------------------------------------------------
// Grasp matrix
// ---------------------------------------------------------------------------

/// Planar wrench dimension.
pub const WRENCH_DIM: usize = 3;

/// `3 x m` wrench map, `m` = 2 force coordinates per contact. Row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspMatrix<R> {
    data: Vec<R>,
    cols: usize,
}

impl<R: Real> GraspMatrix<R> {
    /// Wraps raw row-major `3 x cols` data; test and oracle entry point.
    pub fn from_raw(data: Vec<R>, cols: usize) -> Result<Self> {
        if data.len() != WRENCH_DIM * cols {
            return Err(Error::contract("grasp matrix data must be 3 x cols"));
        }
        Ok(GraspMatrix { data, cols })
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.cols == 0
    }

    pub fn entry(&self, row: usize, col: usize) -> R {
        self.data[row * self.cols + col]
    }

    /// `G * G^T`, the 3x3 wrench Gram matrix.
    fn gram(&self) -> [R; 9] {
        let mut g = [R::zero(); 9];
        for i in 0..WRENCH_DIM {
            for j in 0..WRENCH_DIM {
                let mut acc = R::zero();
                for k in 0..self.cols {
                    acc = acc + self.entry(i, k) * self.entry(j, k);
                }
                g[i * 3 + j] = acc;
            }
        }
        g
    }

    /// Singular values, ascending; square roots of the Gram eigenvalues.
    pub fn singular_values(&self) -> Vec<R> {
        if self.is_empty() {
            return Vec::new();
        }
        symmetric_eigenvalues(&self.gram(), WRENCH_DIM)
            .into_iter()
            .map(|l| l.max(R::zero()).sqrt())
            .collect()
    }
}

/// Builds the grasp matrix from a contact report. Per contact, the normal
/// column maps normal force to `(n, r x n)` and the tangential column maps
/// friction force along the rotated normal, with moment arm `r` from the
/// object center to the contact.
pub fn build_grasp_matrix<R: Real>(
    report: &ContactReport<R>,
    object_center: [R; 2],
) -> GraspMatrix<R> {
    let m = report.contacts.len() * 2;
    let mut data = vec![R::zero(); WRENCH_DIM * m];
    let center = Vec2::new(object_center[0], object_center[1]);
    for (k, c) in report.contacts.iter().enumerate() {
        let n = Vec2::new(c.normal[0], c.normal[1]);
        let t = n.rot90();
        let r = Vec2::new(c.position[0], c.position[1]).sub(center);
        let (cn, ct) = (2 * k, 2 * k + 1);
        data[cn] = n.x;
        data[m + cn] = n.y;
        data[2 * m + cn] = r.cross_z(n);
        data[ct] = t.x;
        data[m + ct] = t.y;
        data[2 * m + ct] = r.cross_z(t);
    }
    GraspMatrix { data, cols: m }
}

// ---------------------------------------------------------------------------
// Quality measures
// ---------------------------------------------------------------------------

/// Minimum singular value; 0 for an empty grasp. Larger is a better grasp.
pub fn q_msv<R: Real>(g: &GraspMatrix<R>) -> R {
    g.singular_values().first().copied().unwrap_or_else(R::zero)
}

/// Wrench ellipsoid volume: product of all singular values. 0 for an empty
/// or rank-deficient grasp.
pub fn q_vew<R: Real>(g: &GraspMatrix<R>) -> R {
    if g.is_empty() {
        return R::zero();
    }
    g.singular_values().into_iter().fold(R::one(), |a, s| a * s)
}

/// Same quantity through the other route: `sqrt(det(G * G^T))` by direct
/// cofactor expansion. Kept as an independent cross-check of [`q_vew`].
pub fn q_vew_via_det<R: Real>(g: &GraspMatrix<R>) -> R {
    if g.is_empty() {
        return R::zero();
    }
    let m = g.gram();
    let det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6])
        + m[2] * (m[3] * m[7] - m[4] * m[6]);
    det.max(R::zero()).sqrt()
}

/// Mean distance from the contacts to the object centroid; `None` without
/// contacts. Smaller means a firmer grasp.
pub fn q_dcc<R: Real>(report: &ContactReport<R>, object_center: [R; 2]) -> Option<R> {
    if report.contacts.is_empty() {
        return None;
    }
    let center = Vec2::new(object_center[0], object_center[1]);
    let sum: R = report
        .contacts
        .iter()
        .map(|c| Vec2::new(c.position[0], c.position[1]).sub(center).norm())
        .sum();
    Some(sum / R::from_usize(report.contacts.len()).expect("contact count fits"))
}

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRecord<R> {
    pub step_index: usize,
    pub contact_count: usize,
    pub q_msv: R,
    pub q_vew: R,
    /// Missing when the step had no contacts.
    pub q_dcc: Option<R>,
}

/// Stability records sampled every `sample_stride` steps of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilitySeries<R> {
    pub records: Vec<StabilityRecord<R>>,
    pub sample_stride: usize,
    /// Environment step duration, seconds; converts strides to time.
    pub time_step: R,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesDerivatives<R> {
    /// `q_msv` forward differences per second; entry k spans records k..k+1.
    pub q_msv: Vec<R>,
    pub q_vew: Vec<R>,
}

pub fn record_for_step<R: Real>(
    step_index: usize,
    report: &ContactReport<R>,
    object_center: [R; 2],
) -> StabilityRecord<R> {
    let g = build_grasp_matrix(report, object_center);
    StabilityRecord {
        step_index,
        contact_count: report.contact_count,
        q_msv: q_msv(&g),
        q_vew: q_vew(&g),
        q_dcc: q_dcc(report, object_center),
    }
}

/// Samples a trajectory at the stride (always including step 0).
pub fn sample_series<R: Real>(
    steps: &[TrajectoryStep<R>],
    sample_stride: usize,
    time_step: R,
) -> Result<StabilitySeries<R>> {
    if sample_stride == 0 {
        return Err(Error::config("sample stride must be positive"));
    }
    let records = steps
        .iter()
        .filter(|s| s.step % sample_stride == 0)
        .map(|s| record_for_step(s.step, &s.report, s.state.object_center))
        .collect();
    Ok(StabilitySeries { records, sample_stride, time_step })
}

impl<R: Real> StabilitySeries<R> {
    /// Forward differences scaled to per-second rates.
    pub fn derivatives(&self) -> Result<SeriesDerivatives<R>> {
        if self.records.len() < 2 {
            return Err(Error::not_applicable(
                "derivatives need at least two sampled records",
            ));
        }
        let dt = R::from_usize(self.sample_stride).expect("stride fits") * self.time_step;
        let diff = |get: fn(&StabilityRecord<R>) -> R| -> Vec<R> {
            self.records
                .windows(2)
                .map(|w| (get(&w[1]) - get(&w[0])) / dt)
                .collect()
        };
        Ok(SeriesDerivatives { q_msv: diff(|r| r.q_msv), q_vew: diff(|r| r.q_vew) })
    }

    /// Tabular form: one row per sampled record, derivative columns empty on
    /// the first row (each derivative spans the preceding interval).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,contact_count,q_msv,q_vew,q_dcc,q_msv_deriv,q_vew_deriv\n");
        let derivs = self.derivatives().ok();
        for (i, r) in self.records.iter().enumerate() {
            let dcc = r.q_dcc.map(|v| v.to_f64_lossy().to_string()).unwrap_or_default();
            let (dm, dv) = match (&derivs, i) {
                (Some(d), i) if i > 0 => (
                    d.q_msv[i - 1].to_f64_lossy().to_string(),
                    d.q_vew[i - 1].to_f64_lossy().to_string(),
                ),
                _ => (String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.step_index,
                r.contact_count,
                r.q_msv.to_f64_lossy(),
                r.q_vew.to_f64_lossy(),
                dcc,
                dm,
                dv
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Trial summary
// ---------------------------------------------------------------------------

/// Population mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat<R> {
    pub mean: R,
    pub std: R,
}

fn stat_of<R: Real>(xs: &[R]) -> Option<Stat<R>> {
    if xs.is_empty() {
        return None;
    }
    let n = R::from_usize(xs.len()).expect("sample count fits");
    let mean = xs.iter().copied().sum::<R>() / n;
    let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<R>() / n;
    Some(Stat { mean, std: var.sqrt() })
}

/// Table-style aggregates of one trial: outcome, total contact over all
/// steps, and mean/std of each sampled stability measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary<R> {
    pub success: bool,
    pub outcome: Outcome,
    /// Sum of contact counts over every step, not only sampled ones.
    pub total_contact: u64,
    pub q_msv: Option<Stat<R>>,
    pub q_vew: Option<Stat<R>>,
    pub q_msv_deriv: Option<Stat<R>>,
    pub q_vew_deriv: Option<Stat<R>>,
    pub q_dcc: Option<Stat<R>>,
}

pub fn summarize_trial<R: Real>(
    steps: &[TrajectoryStep<R>],
    sample_stride: usize,
    time_step: R,
    test_threshold: R,
) -> Result<TrialSummary<R>> {
    if steps.is_empty() {
        return Err(Error::contract("cannot summarize an empty trajectory"));
    }
    let goal = steps[0].goal;
    let outcome = classify_outcome(steps, &goal, test_threshold)?;
    let success = steps.iter().any(|s| is_success(&s.state, &goal, test_threshold));
    let total_contact: u64 = steps.iter().map(|s| s.report.contact_count as u64).sum();

    let series = sample_series(steps, sample_stride, time_step)?;
    let msv: Vec<R> = series.records.iter().map(|r| r.q_msv).collect();
    let vew: Vec<R> = series.records.iter().map(|r| r.q_vew).collect();
    let dcc: Vec<R> = series.records.iter().filter_map(|r| r.q_dcc).collect();
    let derivs = series.derivatives().ok();

    Ok(TrialSummary {
        success,
        outcome,
        total_contact,
        q_msv: stat_of(&msv),
        q_vew: stat_of(&vew),
        q_msv_deriv: derivs.as_ref().and_then(|d| stat_of(&d.q_msv)),
        q_vew_deriv: derivs.as_ref().and_then(|d| stat_of(&d.q_vew)),
        q_dcc: stat_of(&dcc),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Contact, EnvState, Goal, HeightFlag};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn report_from(contacts: Vec<Contact<f64>>) -> ContactReport<f64> {
        let n = contacts.len();
        ContactReport { contacts, sensor_activations: vec![true; n], contact_count: n }
    }

    fn contact(pos: [f64; 2], normal: [f64; 2], force: f64) -> Contact<f64> {
        Contact { position: pos, normal, normal_force: force }
    }

    #[test]
    fn grasp_matrix_single_contact_columns() {
        // Contact at (1, 0) from the center, inward normal (-1, 0).
        let report = report_from(vec![contact([1.0, 0.0], [-1.0, 0.0], 1.0)]);
        let g = build_grasp_matrix(&report, [0.0, 0.0]);
        assert_eq!(g.cols(), 2);
        // Normal column: force along (-1, 0), zero torque (central push).
        assert_relative_eq!(g.entry(0, 0), -1.0);
        assert_relative_eq!(g.entry(1, 0), 0.0);
        assert_relative_eq!(g.entry(2, 0), 0.0);
        // Tangential column: rot90(-1, 0) = (0, -1), torque r x t = -1.
        assert_relative_eq!(g.entry(0, 1), 0.0);
        assert_relative_eq!(g.entry(1, 1), -1.0);
        assert_relative_eq!(g.entry(2, 1), -1.0);
    }

    #[test]
    fn contact_at_center_has_zero_torque_row() {
        let report = report_from(vec![contact([0.3, 0.4], [0.6, 0.8], 1.0)]);
        let g = build_grasp_matrix(&report, [0.3, 0.4]);
        assert_eq!(g.entry(2, 0), 0.0);
        assert_eq!(g.entry(2, 1), 0.0);
    }

    #[test]
    fn antipodal_contacts_cancel_normal_wrench() {
        // Equal normal forces from opposite sides: net wrench zero.
        let report = report_from(vec![
            contact([0.05, 0.0], [-1.0, 0.0], 2.0),
            contact([-0.05, 0.0], [1.0, 0.0], 2.0),
        ]);
        let g = build_grasp_matrix(&report, [0.0, 0.0]);
        // Apply force vector (f, 0, f, 0): normal components only.
        for row in 0..3 {
            let wrench = g.entry(row, 0) * 2.0 + g.entry(row, 2) * 2.0;
            assert_relative_eq!(wrench, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn msv_and_vew_of_diagonal_matrices() {
        // G = 2 * identity(3): all singular values 2.
        let g = GraspMatrix::from_raw(
            vec![2.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0],
            3,
        )
        .unwrap();
        assert_relative_eq!(q_msv(&g), 2.0, epsilon = 1e-12);
        assert_relative_eq!(q_vew(&g), 8.0, epsilon = 1e-12);

        let g = GraspMatrix::from_raw(
            vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
            3,
        )
        .unwrap();
        assert_relative_eq!(q_msv(&g), 1.0, epsilon = 1e-12);
        assert_relative_eq!(q_vew(&g), 6.0, epsilon = 1e-12);
        assert_relative_eq!(q_vew_via_det(&g), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_grasp_reads_zero() {
        let report = report_from(vec![]);
        let g = build_grasp_matrix(&report, [0.0, 0.0]);
        assert!(g.is_empty());
        assert_eq!(q_msv(&g), 0.0);
        assert_eq!(q_vew(&g), 0.0);
        assert_eq!(q_vew_via_det(&g), 0.0);
        assert_eq!(q_dcc(&report, [0.0, 0.0]), None);
    }

    #[test]
    fn rank_deficient_grasp_has_zero_volume() {
        // Single contact spans only 2 wrench directions out of 3.
        let report = report_from(vec![contact([0.05, 0.0], [-1.0, 0.0], 1.0)]);
        let g = build_grasp_matrix(&report, [0.05, 0.0]);
        // Centered contact: torque row vanishes, so the ellipsoid is flat.
        assert_relative_eq!(q_vew(&g), 0.0, epsilon = 1e-12);
        assert_relative_eq!(q_vew_via_det(&g), 0.0, epsilon = 1e-9);
    }

    /// Independent SVD oracle on seeded random matrices.
    #[test]
    fn singular_values_match_external_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..10 {
            let data: Vec<f64> = (0..18).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = GraspMatrix::from_raw(data.clone(), 6).unwrap();
            let na = nalgebra::DMatrix::from_row_slice(3, 6, &data);
            let mut oracle: Vec<f64> = na.svd(false, false).singular_values.iter().copied().collect();
            oracle.sort_by(|a, b| a.partial_cmp(b).unwrap());

            let ours = g.singular_values();
            for (a, b) in ours.iter().zip(&oracle) {
                assert_relative_eq!(a, b, epsilon = 1e-8, max_relative = 1e-8);
            }
            assert_relative_eq!(q_msv(&g), oracle[0], epsilon = 1e-8);
            let prod: f64 = oracle.iter().product();
            assert_relative_eq!(q_vew(&g), prod, max_relative = 1e-8);
            assert_relative_eq!(q_vew_via_det(&g), prod, max_relative = 1e-8);
        }
    }

    #[test]
    fn dcc_means_distances() {
        let center = [0.01, -0.02];
        let single = report_from(vec![contact([0.02, -0.02], [1.0, 0.0], 1.0)]);
        assert_relative_eq!(q_dcc(&single, center).unwrap(), 0.01, epsilon = 1e-12);

        let pair = report_from(vec![
            contact([0.02, -0.02], [1.0, 0.0], 1.0),
            contact([0.01, 0.01], [0.0, 1.0], 1.0),
        ]);
        assert_relative_eq!(q_dcc(&pair, center).unwrap(), 0.02, epsilon = 1e-12);
    }

    #[test]
    fn dcc_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let center = [0.3, -0.1];
        let contacts: Vec<Contact<f64>> = (0..5)
            .map(|_| {
                contact(
                    [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                    [1.0, 0.0],
                    1.0,
                )
            })
            .collect();
        let mut oracle = 0.0;
        for c in &contacts {
            let dx: f64 = c.position[0] - center[0];
            let dy = c.position[1] - center[1];
            oracle += (dx * dx + dy * dy).sqrt();
        }
        oracle /= 5.0;
        let report = report_from(contacts);
        assert_relative_eq!(q_dcc(&report, center).unwrap(), oracle, epsilon = 1e-12);
    }

    fn fake_step(t: usize, contacts: Vec<Contact<f64>>) -> TrajectoryStep<f64> {
        TrajectoryStep {
            step: t,
            goal: Goal { target_angle: 0.0 },
            state: EnvState {
                joint_positions: vec![],
                joint_velocities: vec![],
                object_angle: 1.0,
                object_angular_velocity: 0.0,
                object_center: [0.0, 0.0],
                height_flag: HeightFlag::OnPalm,
                step_index: t,
            },
            report: report_from(contacts),
        }
    }

    #[test]
    fn derivative_arithmetic() {
        // Samples 1.0 then 1.4 at stride 10, dt 0.04: 0.4 / 0.4s = 1.0/s.
        let series = StabilitySeries {
            records: vec![
                StabilityRecord { step_index: 0, contact_count: 2, q_msv: 1.0, q_vew: 2.0, q_dcc: None },
                StabilityRecord { step_index: 10, contact_count: 2, q_msv: 1.4, q_vew: 2.0, q_dcc: None },
            ],
            sample_stride: 10,
            time_step: 0.04,
        };
        let d = series.derivatives().unwrap();
        assert_relative_eq!(d.q_msv[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(d.q_vew[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_derivative() {
        let records: Vec<StabilityRecord<f64>> = (0..5)
            .map(|k| StabilityRecord {
                step_index: k * 10,
                contact_count: 3,
                q_msv: 0.7,
                q_vew: 1.3,
                q_dcc: Some(0.04),
            })
            .collect();
        let series = StabilitySeries { records, sample_stride: 10, time_step: 0.04 };
        let d = series.derivatives().unwrap();
        assert!(d.q_msv.iter().all(|&v| v == 0.0));
        assert!(d.q_vew.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn derivative_matches_elementwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let vals: Vec<(f64, f64)> =
            (0..8).map(|_| (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0))).collect();
        let records: Vec<StabilityRecord<f64>> = vals
            .iter()
            .enumerate()
            .map(|(k, &(m, v))| StabilityRecord {
                step_index: k * 10,
                contact_count: 1,
                q_msv: m,
                q_vew: v,
                q_dcc: None,
            })
            .collect();
        let series = StabilitySeries { records, sample_stride: 10, time_step: 0.04 };
        let d = series.derivatives().unwrap();
        for k in 0..7 {
            assert_relative_eq!(d.q_msv[k], (vals[k + 1].0 - vals[k].0) / 0.4, epsilon = 1e-12);
            assert_relative_eq!(d.q_vew[k], (vals[k + 1].1 - vals[k].1) / 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn short_series_has_no_derivatives() {
        let series = StabilitySeries::<f64> {
            records: vec![StabilityRecord { step_index: 0, contact_count: 0, q_msv: 0.0, q_vew: 0.0, q_dcc: None }],
            sample_stride: 10,
            time_step: 0.04,
        };
        assert!(series.derivatives().is_err());
    }

    #[test]
    fn sampling_keeps_stride_multiples() {
        let steps: Vec<TrajectoryStep<f64>> = (0..25)
            .map(|t| fake_step(t, vec![contact([0.04, 0.0], [-1.0, 0.0], 1.0)]))
            .collect();
        let series = sample_series(&steps, 10, 0.04).unwrap();
        let sampled: Vec<usize> = series.records.iter().map(|r| r.step_index).collect();
        assert_eq!(sampled, vec![0, 10, 20]);
        assert!(sample_series(&steps, 0, 0.04).is_err());
    }

    #[test]
    fn trial_summary_counts_all_steps() {
        // Constant 10 contacts over 100 steps: total contact 1000.
        let contacts = |n: usize| -> Vec<Contact<f64>> {
            (0..n)
                .map(|k| {
                    let a = k as f64;
                    contact([0.04 * a.cos(), 0.04 * a.sin()], [-a.cos(), -a.sin()], 1.0)
                })
                .collect()
        };
        let steps: Vec<TrajectoryStep<f64>> = (0..100).map(|t| fake_step(t, contacts(10))).collect();
        let summary = summarize_trial(&steps, 10, 0.04, 0.4).unwrap();
        assert_eq!(summary.total_contact, 1000);
        assert_eq!(summary.outcome, Outcome::Incomplete);
        assert!(!summary.success);
        assert!(summary.q_msv.is_some());
        assert!(summary.q_dcc.is_some());
    }

    #[test]
    fn contactless_trial_has_missing_dcc() {
        let steps: Vec<TrajectoryStep<f64>> = (0..30).map(|t| fake_step(t, vec![])).collect();
        let summary = summarize_trial(&steps, 10, 0.04, 0.4).unwrap();
        assert_eq!(summary.total_contact, 0);
        assert_eq!(summary.q_dcc, None);
        // Grasp measures still defined (all zero) on sampled records.
        assert_eq!(summary.q_msv.unwrap().mean, 0.0);
    }

    #[test]
    fn trial_summary_matches_hand_aggregation() {
        // Three sampled records with known q_msv values.
        let mut steps = Vec::new();
        for t in 0..3 {
            // Scale contact force arm to vary the metrics by step.
            let r = 0.03 + 0.01 * t as f64;
            steps.push(fake_step(
                t * 10,
                vec![
                    contact([r, 0.0], [-1.0, 0.0], 1.0),
                    contact([-r, 0.0], [1.0, 0.0], 1.0),
                ],
            ));
        }
        let summary = summarize_trial(&steps, 10, 0.04, 0.4).unwrap();
        // Hand-compute per record.
        let mut msv = Vec::new();
        for t in 0..3usize {
            let r = 0.03 + 0.01 * t as f64;
            let report = report_from(vec![
                contact([r, 0.0], [-1.0, 0.0], 1.0),
                contact([-r, 0.0], [1.0, 0.0], 1.0),
            ]);
            msv.push(q_msv(&build_grasp_matrix(&report, [0.0, 0.0])));
        }
        let mean = msv.iter().sum::<f64>() / 3.0;
        let std = (msv.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let got = summary.q_msv.unwrap();
        assert_relative_eq!(got.mean, mean, epsilon = 1e-12);
        assert_relative_eq!(got.std, std, epsilon = 1e-12);
        // Q_DCC is the contact radius at each step.
        assert_relative_eq!(summary.q_dcc.unwrap().mean, 0.04, epsilon = 1e-12);
    }

    #[test]
    fn csv_layout_is_stable() {
        let steps: Vec<TrajectoryStep<f64>> = (0..21)
            .map(|t| fake_step(t, vec![contact([0.04, 0.0], [-1.0, 0.0], 1.0)]))
            .collect();
        let series = sample_series(&steps, 10, 0.04).unwrap();
        let csv = series.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "step,contact_count,q_msv,q_vew,q_dcc,q_msv_deriv,q_vew_deriv"
        );
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[1], "1");
        // First row has empty derivative fields.
        assert_eq!(first[5], "");
        assert_eq!(first[6], "");
        let second: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(second[0], "10");
        assert!(!second[5].is_empty());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn scaling_covariance(s in 0.1f64..5.0, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = GraspMatrix::from_raw(data.clone(), 6).unwrap();
            let scaled =
                GraspMatrix::from_raw(data.iter().map(|v| v * s).collect(), 6).unwrap();
            prop_assert!((q_msv(&scaled) - s * q_msv(&g)).abs() < 1e-9);
            prop_assert!((q_vew(&scaled) - s.powi(3) * q_vew(&g)).abs() < 1e-9 * s.powi(3).max(1.0));
        }

        #[test]
        fn rotation_invariance(theta in -3.0f64..3.0, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = [0.0, 0.0];
            let contacts: Vec<Contact<f64>> = (0..4)
                .map(|_| {
                    let a = rng.random_range(-3.0..3.0);
                    let r = rng.random_range(0.02..0.05);
                    contact([r * f64::cos(a), r * f64::sin(a)], [-f64::cos(a), -f64::sin(a)], 1.0)
                })
                .collect();
            let rotated: Vec<Contact<f64>> = contacts
                .iter()
                .map(|c| {
                    let rot = |v: [f64; 2]| {
                        [
                            v[0] * theta.cos() - v[1] * theta.sin(),
                            v[0] * theta.sin() + v[1] * theta.cos(),
                        ]
                    };
                    contact(rot(c.position), rot(c.normal), c.normal_force)
                })
                .collect();
            let g0 = build_grasp_matrix(&report_from(contacts.clone()), center);
            let g1 = build_grasp_matrix(&report_from(rotated.clone()), center);
            prop_assert!((q_msv(&g0) - q_msv(&g1)).abs() < 1e-9);
            prop_assert!((q_vew(&g0) - q_vew(&g1)).abs() < 1e-9);
            let d0 = q_dcc(&report_from(contacts), center).unwrap();
            let d1 = q_dcc(&report_from(rotated), center).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }

        #[test]
        fn min_singular_value_cubed_bounds_volume(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = GraspMatrix::from_raw(data, 6).unwrap();
            prop_assert!(q_msv(&g).powi(3) <= q_vew(&g) + 1e-12);
        }

        #[test]
        fn dcc_translation_invariance(dx in -1.0f64..1.0, dy in -1.0f64..1.0, seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = [0.1, -0.2];
            let contacts: Vec<Contact<f64>> = (0..3)
                .map(|_| contact(
                    [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)],
                    [1.0, 0.0],
                    1.0,
                ))
                .collect();
            let moved: Vec<Contact<f64>> = contacts
                .iter()
                .map(|c| contact([c.position[0] + dx, c.position[1] + dy], c.normal, c.normal_force))
                .collect();
            let d0 = q_dcc(&report_from(contacts), center).unwrap();
            let d1 = q_dcc(&report_from(moved), [center[0] + dx, center[1] + dy]).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-12);
        }
    }
}
