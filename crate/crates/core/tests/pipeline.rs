use std::collections::BTreeSet;

use saddlekit::chew::chew_path;
use saddlekit::delaunay::{delaunay_l1, DEFAULT_MAX_FLIPS};
use saddlekit::exactplane::{int, rat, ExactMatrix, ExactVector, LinearAction};
use saddlekit::geodesic::{enumerate, shortest, DEFAULT_BUDGET};
use saddlekit::surface::models::{octagon, slit_torus};
use saddlekit::surface::apply_surface;

fn sheared_slit() -> saddlekit::surface::TranslationSurface {
    let g = ExactMatrix::new(rat(3, 2), rat(1, 3), rat(1, 5), rat(7, 9));
    slit_torus(&g, &g.apply(&ExactVector::new(rat(2, 7), rat(3, 11)))).unwrap()
}

#[test]
fn holonomies_move_with_the_surface() {
    let s = octagon();
    let g = ExactMatrix::new(int(1), rat(1, 2), int(0), int(1));
    let gs = apply_surface(&g, &s).unwrap();
    // g stretches lengths by at most 3/2, so a radius of 3 on gs covers radius 2 on s
    let moved: BTreeSet<ExactVector> = enumerate(&s, &int(2), DEFAULT_BUDGET).unwrap().holonomies().iter().map(|v| g.apply(v)).collect();
    let direct: BTreeSet<ExactVector> = enumerate(&gs, &int(3), DEFAULT_BUDGET).unwrap().holonomies().into_iter().collect();
    assert!(moved.is_subset(&direct));
}

#[test]
fn delaunay_then_chew_on_a_slit_torus() {
    let s = sheared_slit();
    let t = delaunay_l1(&s, DEFAULT_MAX_FLIPS).unwrap();
    let gamma = shortest(&t.surface, DEFAULT_BUDGET).unwrap();
    let is_edge = t.surface.triangles().iter().flat_map(|tr| tr.edges.iter()).any(|e| *e == gamma.holonomy || (e + &gamma.holonomy).is_zero());
    assert!(is_edge);
    let set = enumerate(&t.surface, &int(3), DEFAULT_BUDGET).unwrap();
    assert!(!set.connections.is_empty());
    for beta in &set.connections {
        let p = chew_path(&t, beta).unwrap();
        assert_eq!(p.holonomy(), beta.holonomy);
        assert!(p.within_sqrt10().unwrap(), "ratio {}", p.ratio());
    }
}
