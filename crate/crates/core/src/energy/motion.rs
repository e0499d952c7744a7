use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::{norm_and_dir3, DynamicTrajectorySet};
use crate::cues::TrackId;

fn zero_grads(dynamic: &DynamicTrajectorySet) -> BTreeMap<TrackId, Vec<Vector3<f64>>> {
    dynamic
        .tracks
        .iter()
        .map(|(id, t)| (*id, vec![Vector3::zeros(); t.points.len()]))
        .collect()
}

/// As-rigid-as-possible prior: `| |p_k,t - p_m,t| - |p_k,t+1 - p_m,t+1| |`
/// summed over neighbor pairs and consecutive frames where all four samples
/// are valid.
pub fn e_arap(dynamic: &DynamicTrajectorySet) -> f64 {
    let mut e = 0.0;
    for_each_pair(dynamic, |_, _, _, a0, b0, a1, b1| {
        e += ((a0 - b0).norm() - (a1 - b1).norm()).abs();
    });
    e
}

pub fn e_arap_gradient(dynamic: &DynamicTrajectorySet) -> (f64, BTreeMap<TrackId, Vec<Vector3<f64>>>) {
    let mut grads = zero_grads(dynamic);
    let mut e = 0.0;
    let mut updates = Vec::new();
    for_each_pair(dynamic, |k, m, t, a0, b0, a1, b1| {
        let (d0, u0) = norm_and_dir3(&(a0 - b0));
        let (d1, u1) = norm_and_dir3(&(a1 - b1));
        let diff = d0 - d1;
        e += diff.abs();
        let s = if diff.abs() <= super::SUBGRADIENT_ZERO { 0.0 } else { diff.signum() };
        updates.push((k, m, t, s * u0, s * u1));
    });
    for (k, m, t, g0, g1) in updates {
        grads.get_mut(&k).unwrap()[t] += g0;
        grads.get_mut(&m).unwrap()[t] -= g0;
        grads.get_mut(&k).unwrap()[t + 1] -= g1;
        grads.get_mut(&m).unwrap()[t + 1] += g1;
    }
    (e, grads)
}

#[allow(clippy::type_complexity)]
fn for_each_pair(
    dynamic: &DynamicTrajectorySet,
    mut f: impl FnMut(TrackId, TrackId, usize, &Vector3<f64>, &Vector3<f64>, &Vector3<f64>, &Vector3<f64>),
) {
    for (k, nbrs) in &dynamic.neighbors {
        let Some(tk) = dynamic.tracks.get(k) else { continue };
        for m in nbrs {
            let Some(tm) = dynamic.tracks.get(m) else { continue };
            for t in 0..tk.points.len().saturating_sub(1) {
                if let (Some(a0), Some(b0), Some(a1), Some(b1)) = (tk.at(t), tm.at(t), tk.at(t + 1), tm.at(t + 1)) {
                    f(*k, *m, t, a0, b0, a1, b1);
                }
            }
        }
    }
}

/// Temporal smoothness: `|p_k,t - p_k,t+1|` over valid consecutive samples.
pub fn e_smooth(dynamic: &DynamicTrajectorySet) -> f64 {
    dynamic
        .tracks
        .values()
        .flat_map(|tr| (0..tr.points.len().saturating_sub(1)).filter_map(move |t| Some((tr.at(t)? - tr.at(t + 1)?).norm())))
        .sum()
}

pub fn e_smooth_gradient(dynamic: &DynamicTrajectorySet) -> (f64, BTreeMap<TrackId, Vec<Vector3<f64>>>) {
    let mut grads = zero_grads(dynamic);
    let mut e = 0.0;
    for (id, tr) in &dynamic.tracks {
        let g = grads.get_mut(id).unwrap();
        for t in 0..tr.points.len().saturating_sub(1) {
            if let (Some(a), Some(b)) = (tr.at(t), tr.at(t + 1)) {
                let (n, u) = norm_and_dir3(&(a - b));
                e += n;
                g[t] += u;
                g[t + 1] -= u;
            }
        }
    }
    (e, grads)
}
