// SPDX-License-Identifier: Apache-2.0

use ndarray::{Array1, ArrayView1, ArrayViewMut1};

/// Scale `x` onto the closed ball of radius `radius`: min{1, R/‖x‖}·x.
pub fn clip(x: ArrayView1<f64>, radius: f64) -> Array1<f64> {
    let mut out = x.to_owned();
    clip_in_place(out.view_mut(), radius);
    out
}

pub fn clip_in_place(mut x: ArrayViewMut1<f64>, radius: f64) {
    let norm = x.dot(&x).sqrt();
    if norm > radius {
        let scale = radius / norm;
        x.mapv_inplace(|v| v * scale);
        // Rounding can leave the result just outside the ball; shrink until
        // it is inside so that clipping twice changes nothing.
        while x.dot(&x).sqrt() > radius {
            x.mapv_inplace(|v| v * (1.0 - f64::EPSILON));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let c = clip(array![3.0, 4.0].view(), 1.0);
        assert!((c[0] - 0.6).abs() < 1e-15 && (c[1] - 0.8).abs() < 1e-15);
        assert_eq!(clip(array![0.1, 0.0].view(), 1.0), array![0.1, 0.0]);
        assert_eq!(clip(array![0.0, 0.0, 0.0].view(), 2.0), array![0.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn contract(xs in proptest::collection::vec(-1e3f64..1e3, 1..8), r in 1e-3f64..100.0) {
            let x = Array1::from(xs);
            let c = clip(x.view(), r);
            let norm = c.dot(&c).sqrt();
            prop_assert!(norm <= r * (1.0 + 1e-12));
            if x.dot(&x).sqrt() <= r {
                prop_assert_eq!(&c, &x);
            }
            prop_assert_eq!(clip(c.view(), r), c);
        }
    }
}
