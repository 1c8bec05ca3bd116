//! Randomized invariants over the lattice, serialization and sensing APIs.

use nalgebra::Point3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use morphwing::lattice::{
    read_lattice_string, weld, write_lattice_string, BeamLattice, Channel, ChannelKind,
    EdgeKind, FiberPath, LatticeEdge, LatticeFile, LatticeNode, NodeTags,
};
use morphwing::sensing::{
    attenuate, read_dataset_string, write_dataset_string, AttenuationModel, FiberStrain,
    SensorReading, SweepRow,
};
use morphwing::structural::MorphState;

fn arb_point() -> impl Strategy<Value = Point3<f64>> {
    (
        -200.0f64..200.0,
        -200.0f64..200.0,
        -200.0f64..200.0,
    )
        .prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn arb_tags() -> impl Strategy<Value = NodeTags> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(i, s, r, t)| {
        let mut tags = NodeTags::default();
        if i {
            tags = tags.union(NodeTags::INTERNAL);
        }
        if s {
            tags = tags.union(NodeTags::SURFACE);
        }
        if r {
            tags = tags.union(NodeTags::ROD_ANCHOR);
        }
        if t {
            tags = tags.union(NodeTags::TIP_ANCHOR);
        }
        tags
    })
}

/// Random lattice with deliberate near-duplicate nodes so welding has work
/// to do: each base point may be echoed with a sub-tolerance offset.
fn arb_lattice() -> impl Strategy<Value = BeamLattice> {
    let node = (arb_point(), arb_tags(), any::<bool>());
    proptest::collection::vec(node, 2..20).prop_flat_map(|base| {
        let mut nodes = Vec::new();
        for (p, tags, echo) in &base {
            nodes.push(LatticeNode {
                position: *p,
                tags: *tags,
            });
            if *echo {
                nodes.push(LatticeNode {
                    position: Point3::new(p.x + 1e-8, p.y - 1e-8, p.z),
                    tags: *tags,
                });
            }
        }
        let n = nodes.len();
        let edge = (0..n, 0..n, 0.2f64..1.5, any::<bool>());
        proptest::collection::vec(edge, 1..40).prop_map(move |raw| BeamLattice {
            nodes: nodes.clone(),
            edges: raw
                .into_iter()
                .map(|(a, b, radius, surface)| LatticeEdge {
                    a,
                    b,
                    radius,
                    segment: None,
                    kind: if surface {
                        EdgeKind::Surface
                    } else {
                        EdgeKind::Internal
                    },
                })
                .collect(),
        })
    })
}

fn lattices_equal(a: &BeamLattice, b: &BeamLattice) -> bool {
    a.nodes.len() == b.nodes.len()
        && a.edges.len() == b.edges.len()
        && a.nodes
            .iter()
            .zip(&b.nodes)
            .all(|(x, y)| x.position == y.position && x.tags == y.tags)
        && a.edges.iter().zip(&b.edges).all(|(x, y)| {
            x.a == y.a && x.b == y.b && x.radius == y.radius && x.kind == y.kind
        })
}

proptest! {
    #[test]
    fn weld_is_idempotent(lattice in arb_lattice()) {
        let once = weld(lattice);
        let twice = weld(once.clone());
        prop_assert!(lattices_equal(&once, &twice));
    }

    #[test]
    fn weld_preserves_tags_and_bounds(lattice in arb_lattice()) {
        let tag_union = |l: &BeamLattice| {
            l.nodes.iter().fold(NodeTags::default(), |acc, n| acc.union(n.tags))
        };
        let before = tag_union(&lattice);
        let n_before = lattice.nodes.len();
        let welded = weld(lattice);
        prop_assert_eq!(tag_union(&welded), before);
        prop_assert!(welded.nodes.len() <= n_before);
        for e in &welded.edges {
            prop_assert!(e.a != e.b);
            prop_assert!(e.a < welded.nodes.len() && e.b < welded.nodes.len());
        }
    }

    #[test]
    fn attenuation_in_range_and_monotone(
        a in 0.0f64..50.0,
        b in 0.0f64..5.0,
        strain in 0.0f64..0.5,
        curve in 0.0f64..3.0,
        d_strain in 0.0f64..0.5,
        d_curve in 0.0f64..3.0,
    ) {
        let model = AttenuationModel {
            stretch_coefficient: a,
            bend_coefficient: b,
            noise_sigma: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let low = attenuate(&model, &FiberStrain {
            elongation_strain: strain,
            curvature_increase: curve,
        }, &mut rng);
        let high = attenuate(&model, &FiberStrain {
            elongation_strain: strain + d_strain,
            curvature_increase: curve + d_curve,
        }, &mut rng);
        prop_assert!((0.0..=1.0).contains(&low));
        prop_assert!((0.0..=1.0).contains(&high));
        prop_assert!(high <= low);
    }

    #[test]
    fn lattice_format_roundtrip_is_byte_stable(lattice in arb_lattice()) {
        let lattice = weld(lattice);
        let file = LatticeFile {
            channels: vec![Channel::new(
                vec![Point3::new(0.0, -5.0, 0.0), Point3::new(0.0, 255.0, 0.0)],
                2.0,
                ChannelKind::Rod,
            )],
            fibers: vec![FiberPath {
                id: 1,
                waypoints: vec![
                    Point3::new(1.0, 2.0, 3.0),
                    Point3::new(4.0, 5.0, 6.5),
                ],
                attachments: vec![vec![(0, 1.0)], vec![(0, 0.25), (1, 0.75)]],
                lattice_fingerprint: lattice.fingerprint(),
            }],
            lattice,
        };
        let text = write_lattice_string(&file);
        let back = read_lattice_string(&text).unwrap();
        prop_assert_eq!(write_lattice_string(&back), text);
        prop_assert!(lattices_equal(&file.lattice, &back.lattice));
    }

    #[test]
    fn dataset_roundtrip_is_byte_stable(
        rows in proptest::collection::vec(
            (
                -90.0f64..90.0,
                0.0f64..60.0,
                -20.0f64..30.0,
                proptest::array::uniform6(0.0f64..1.0),
                any::<bool>(),
            ),
            1..30,
        )
    ) {
        let rows: Vec<SweepRow> = rows
            .into_iter()
            .map(|(t, c, e, amps, flagged)| SweepRow {
                state: MorphState {
                    twist_deg: t,
                    camber_deg: c,
                    extension_mm: e,
                },
                reading: SensorReading { amplitudes: amps },
                flagged,
            })
            .collect();
        let text = write_dataset_string(&rows);
        let back = read_dataset_string(&text, "prop").unwrap();
        prop_assert_eq!(back.len(), rows.len());
        prop_assert_eq!(write_dataset_string(&back), text);
    }
}
