mod common;

use std::collections::BTreeMap;

use common::{random_instance, transform, Instance};
use dynrecon::energy::{energy, DynamicTrajectorySet, StaticPointSet, Term, Variables};
use dynrecon::geometry::rotvec_to_matrix;
use nalgebra::Vector3;
use proptest::prelude::*;

const TERMS: [Term; 6] = [Term::Ba, Term::Nr, Term::Cam, Term::Arap, Term::Smooth, Term::Init(3)];

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Renames every tracklet id through `f` and reverses the tracklet order.
fn relabel(inst: &Instance, f: impl Fn(u32) -> u32) -> Instance {
    let mut tracklets = inst.tracklets.clone();
    tracklets.reverse();
    tracklets.iter_mut().for_each(|t| t.id = f(t.id));
    let v = &inst.vars;
    let remap = |m: &BTreeMap<u32, Vec<u32>>| m.iter().map(|(k, n)| (f(*k), n.iter().map(|x| f(*x)).collect())).collect();
    let dynamic = DynamicTrajectorySet {
        tracks: v.dynamic.tracks.iter().map(|(k, t)| (f(*k), t.clone())).collect(),
        instance_of: v.dynamic.instance_of.iter().map(|(k, i)| (f(*k), *i)).collect(),
        neighbors: remap(&v.dynamic.neighbors),
    };
    let static_points = StaticPointSet { points: v.static_points.points.iter().map(|(k, p)| (f(*k), *p)).collect() };
    Instance {
        vars: Variables { trajectory: v.trajectory.clone(), static_points, dynamic },
        tracklets,
        depth: inst.depth.clone(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn all_terms_are_rigid_gauge_invariant(
        seed in 0u64..1000,
        w in prop::array::uniform3(-2.0f64..2.0),
        t in prop::array::uniform3(-5.0f64..5.0),
    ) {
        let inst = random_instance(seed);
        let moved = transform(&inst.vars, 1.0, &rotvec_to_matrix(&Vector3::from(w)), &Vector3::from(t));
        for term in TERMS {
            let (a, b) = (energy(term, &inst.vars, &inst.obs()), energy(term, &moved, &inst.obs()));
            prop_assert!(close(a, b), "{:?}: {} vs {}", term, a, b);
        }
    }

    #[test]
    fn reprojection_terms_are_similarity_invariant(
        seed in 0u64..1000,
        w in prop::array::uniform3(-2.0f64..2.0),
        t in prop::array::uniform3(-5.0f64..5.0),
        s in 0.2f64..5.0,
    ) {
        let inst = random_instance(seed);
        let moved = transform(&inst.vars, s, &rotvec_to_matrix(&Vector3::from(w)), &Vector3::from(t));
        for term in [Term::Ba, Term::Nr] {
            let (a, b) = (energy(term, &inst.vars, &inst.obs()), energy(term, &moved, &inst.obs()));
            prop_assert!(close(a, b), "{:?}: {} vs {}", term, a, b);
        }
        // The priors are homogeneous of degree one in the world scale.
        for term in [Term::Arap, Term::Smooth] {
            let (a, b) = (energy(term, &inst.vars, &inst.obs()), energy(term, &moved, &inst.obs()));
            prop_assert!(close(s * a, b), "{:?}: {} * {} vs {}", term, s, a, b);
        }
    }

    #[test]
    fn all_terms_ignore_tracklet_order_and_ids(seed in 0u64..1000, offset in 1u32..10_000, stride in 1u32..7) {
        let inst = random_instance(seed);
        let renamed = relabel(&inst, |id| offset + stride * (200 - id));
        for term in TERMS {
            let (a, b) = (energy(term, &inst.vars, &inst.obs()), energy(term, &renamed.vars, &renamed.obs()));
            prop_assert!(close(a, b), "{:?}: {} vs {}", term, a, b);
        }
    }
}
