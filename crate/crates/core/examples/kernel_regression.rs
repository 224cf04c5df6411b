//! A wide network trained by gradient descent next to kernel regression with
//! its initial tangent kernel.

use dynamical::harness::verify::regression_equivalence;

fn main() -> dynamical::Result<()> {
    for width in [256, 1024, 4096] {
        let r = regression_equivalence(width, 0.05, 40, 0)?;
        println!("width {width:5}: max-abs gap to kernel regression {:.4e}", r.max_abs_error);
    }
    Ok(())
}
