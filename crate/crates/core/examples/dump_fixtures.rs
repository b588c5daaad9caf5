use saddlekit::exactplane::{rat, ExactMatrix, ExactVector};
use saddlekit::surface::models::{octagon, slit_torus, square_torus};

fn main() {
    let dir = std::env::args().nth(1).expect("output directory");
    let slit = slit_torus(&ExactMatrix::identity(), &ExactVector::new(rat(1, 3), rat(1, 5))).unwrap();
    for (name, s) in [("torus", square_torus()), ("octagon", octagon()), ("slit", slit)] {
        std::fs::write(format!("{dir}/{name}.json"), s.to_json()).unwrap();
    }
}
