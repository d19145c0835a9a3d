//! Products, powers and reduction of Gaussian max-mixtures.

use nalgebra::{dmatrix, dvector};
use possibility_lmb::possibility::{GaussianComponent, MaxMixture, MixtureReduction};

fn main() -> possibility_lmb::Result<()> {
    let f = MaxMixture::new(vec![
        GaussianComponent::new(1.0, dvector![0.0], dmatrix![1.0])?,
        GaussianComponent::new(0.6, dvector![4.0], dmatrix![0.5])?,
    ])?;
    let g = MaxMixture::single(GaussianComponent::new(1.0, dvector![1.0], dmatrix![2.0])?);

    let fg = f.product(&g)?;
    println!("f*g has {} components, supremum {:.4}", fg.len(), fg.supremum()?);
    for x in [-1.0, 0.5, 2.0, 4.0] {
        let x = dvector![x];
        println!(
            "  x = {:4.1}: f = {:.4}, g = {:.4}, f*g = {:.4}",
            x[0],
            f.eval(&x)?,
            g.eval(&x)?,
            fg.eval(&x)?
        );
    }

    // powers keep the max-mixture form, component by component
    let half = f.power(0.5)?;
    println!("f^0.5 at 4.0 = {:.4}, sqrt(f(4.0)) = {:.4}", half.eval(&dvector![4.0])?, f.eval(&dvector![4.0])?.sqrt());

    let (normalized, sup) = fg.normalize()?;
    println!("normalized f*g: supremum {:.4} (was {sup:.4})", normalized.supremum()?);

    // many near-duplicates collapse under reduction
    let crowd = MaxMixture::new(
        (0..40)
            .map(|i| GaussianComponent::new(1.0 - 0.02 * i as f64, dvector![0.01 * i as f64], dmatrix![1.0]))
            .collect::<Result<_, _>>()?,
    )?;
    let reduced = crowd.reduce(&MixtureReduction::default())?;
    println!("40 crowded components reduce to {}", reduced.len());
    Ok(())
}
