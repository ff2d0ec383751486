//! Splits a positive-definite matrix into the part that acts like it on a
//! subspace and the part that annihilates the subspace, and checks the
//! properties the forgetting step relies on.

use sift_rls::numerics::{rel_diff, sym_eigvals};
use sift_rls::subspace::{decompose, numerical_rank, orthogonal_complement_basis, SubspaceBasis};
use sift_rls::{Matrix, SymMatrix};

fn main() -> sift_rls::Result<()> {
    let a = SymMatrix::from_symmetric(Matrix::from_row_slice(
        3,
        3,
        &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0],
    ))?;
    let s = SubspaceBasis::new(Matrix::from_row_slice(3, 1, &[1.0, 1.0, 0.0]))?;
    let dec = decompose(&a, &s)?;

    println!("A =\n{}", a.as_matrix());
    println!("parallel part =\n{}", dec.parallel.as_matrix());
    println!("orthogonal part =\n{}", dec.orthogonal.as_matrix());
    println!(
        "ranks: {} and {}",
        numerical_rank(dec.parallel.as_matrix())?,
        numerical_rank(dec.orthogonal.as_matrix())?
    );
    println!("eigenvalues of A:          {:?}", sym_eigvals(&a)?);
    println!(
        "eigenvalues of orthogonal: {:?}",
        sym_eigvals(&dec.orthogonal)?
    );

    let v = s.matrix();
    println!(
        "parallel·v vs A·v: relative gap {:.1e}",
        rel_diff(&(dec.parallel.as_matrix() * v), &(a.as_matrix() * v))
    );
    println!(
        "orthogonal·v: norm {:.1e}",
        (dec.orthogonal.as_matrix() * v).norm()
    );

    // a rescaled basis spans the same subspace and gives the same split
    let scaled = SubspaceBasis::new(v * -7.5)?;
    println!(
        "basis change: relative gap {:.1e}",
        rel_diff(
            decompose(&a, &scaled)?.parallel.as_matrix(),
            dec.parallel.as_matrix()
        )
    );

    // the orthogonal part is the parallel part over the A-orthogonal complement
    let w = orthogonal_complement_basis(&s, &a)?.expect("proper subspace");
    println!(
        "duality: relative gap {:.1e}",
        rel_diff(
            decompose(&a, &w)?.parallel.as_matrix(),
            dec.orthogonal.as_matrix()
        )
    );
    Ok(())
}
