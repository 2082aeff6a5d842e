//! Hoyer sparsity of a few hand-picked activations.

use ff_sparsity::theory::hoyer_sparsity;

fn main() -> ff_sparsity::Result<()> {
    let cases: [(&str, Vec<f64>); 4] = [
        ("one-hot", vec![0.0, 0.0, 5.0, 0.0]),
        ("uniform", vec![1.0; 4]),
        ("[3, 4]", vec![3.0, 4.0]),
        ("half active", vec![1.0, 2.0, 0.0, 0.0]),
    ];
    for (name, h) in &cases {
        println!("{name:>12}: S = {:.6}", hoyer_sparsity(h)?);
    }
    match hoyer_sparsity(&[0.0, 0.0]) {
        Err(e) => println!("{:>12}: {e}", "silent"),
        Ok(s) => println!("{:>12}: {s}", "silent"),
    }
    Ok(())
}
