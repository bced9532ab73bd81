// Mirrors the README library example.
use coshrink::covariance::Representation;
use coshrink::shrinkage::{PipelineInput, shrink_basis_pipeline};
use coshrink::{closure, partial_correlation};
use nalgebra::DMatrix;

#[test]
fn readme_library_example() -> coshrink::Result<()> {
    let raw = DMatrix::from_row_slice(
        4,
        3,
        &[
            1.0, 2.0, 7.0, //
            2.0, 2.0, 6.0, //
            1.5, 2.5, 6.0, //
            1.0, 3.0, 6.0,
        ],
    );
    let comps = closure(&raw)?;
    let est = shrink_basis_pipeline(
        PipelineInput::Compositions(&comps),
        Representation::Alr { ref_index: 3 },
        true,
    )?;
    let pcor = partial_correlation(&est.covariance)?;
    println!("lambda = {}, r_12 = {}", est.lambda, pcor.values()[(0, 1)]);
    assert!((0.0..=1.0).contains(&est.lambda));
    assert!(pcor.values()[(0, 1)].abs() <= 1.0);
    Ok(())
}
