//! QONLINE_DIM_CAP must override the default dimension cap. Kept in its own
//! test binary because the variable is process-global.

use qonline::qmodel::{random_density, RngStream};
use qonline::spectra::{dim_cap, tensor, HermitianMatrix, DEFAULT_DIM_CAP};
use qonline::Error;

#[test]
fn env_var_overrides_dim_cap() {
    assert_eq!(dim_cap(), DEFAULT_DIM_CAP);

    std::env::set_var("QONLINE_DIM_CAP", "4");
    assert_eq!(dim_cap(), 4);

    // 2 qubits still fit; 3 exceed the cap.
    let mut rng = RngStream::from_seed(1);
    assert!(random_density(2, &mut rng).is_ok());
    assert!(matches!(
        random_density(3, &mut rng),
        Err(Error::DimensionCap { .. })
    ));

    // Tensor products respect the cap too.
    let a = HermitianMatrix::identity(2);
    let big = tensor(&a, &HermitianMatrix::identity(4));
    assert!(matches!(big, Err(Error::DimensionCap { .. })));

    std::env::set_var("QONLINE_DIM_CAP", "not-a-number");
    assert_eq!(dim_cap(), DEFAULT_DIM_CAP);

    std::env::remove_var("QONLINE_DIM_CAP");
    assert_eq!(dim_cap(), DEFAULT_DIM_CAP);
}
