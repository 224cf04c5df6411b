//! Alignment, the generalization bound and the two bound checks on an
//! analytic ReLU kernel.

use dynamical::kernelspace::{analytic_relu_ntk, eigendecompose};
use dynamical::theoryprobe::{alignment, check_bounds, generalization_bound};
use dynamical::Matrix;

fn main() -> dynamical::Result<()> {
    let xs: Vec<Vec<f64>> = (0..12)
        .map(|i| {
            let a = i as f64 * 0.5;
            vec![a.cos(), a.sin(), 0.3]
        })
        .collect();
    let labels: Vec<usize> = (0..12).map(|i| i % 3).collect();
    let gram = analytic_relu_ntk(&xs, 3)?;
    let y = Matrix::one_hot(&labels, 3);
    println!("alignment {:.4}", alignment(&gram, &y)?.value);
    println!("bound B   {:.4}", generalization_bound(&gram, &y)?.value);
    let eta = 0.5 / eigendecompose(&gram)?.max();
    for t in [1, 5, 50] {
        let r = check_bounds(&gram, &y, eta, t)?;
        let t1 = &r.theorem1;
        println!("t={t:2}: {:.4} ≤ E_t² = {:.4} ≤ {:.4} ({})", t1.lower, t1.e_t_squared, t1.upper, t1.holds);
    }
    Ok(())
}
