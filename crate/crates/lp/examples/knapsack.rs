//! Solves a small knapsack as a linear program and as a binary program.

use railcg_lp::{solve_lp, solve_mip, MipModel, MipOptions, Sense};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let weights = [5.0, 7.0, 4.0, 5.0, 3.0];
    let mut mip = MipModel::new();
    let capacity = mip.add_row(Sense::Le, 13.0, &[])?;
    let items: Vec<_> = values
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| mip.add_binary(-v, &[(capacity, w)]))
        .collect::<Result<_, _>>()?;
    let lp = solve_lp(&mip.lp)?;
    println!(
        "relaxation value {:.3}, capacity dual {:.3}",
        -lp.objective, -lp.duals[capacity.0]
    );
    let sol = solve_mip(&mip, &MipOptions::default())?;
    let x = sol.x.ok_or("no feasible packing")?;
    let chosen: Vec<usize> = items
        .iter()
        .enumerate()
        .filter(|(_, c)| x[c.0] > 0.5)
        .map(|(i, _)| i)
        .collect();
    println!(
        "integer value {} with items {chosen:?} after {} nodes ({:?})",
        -sol.objective, sol.nodes, sol.status
    );
    Ok(())
}
