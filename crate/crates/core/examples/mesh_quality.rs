//! Builds the unit-box and filter meshes and prints their size and shape
//! regularity.

use ssf_biofilm::mesh::{build_ssf_mesh, build_structured_mesh, check_admissibility, BoundaryTag, Rect};

fn main() -> ssf_biofilm::Result<()> {
    for n in [8, 16, 32, 64] {
        let m = build_structured_mesh(n, n, Rect::unit())?;
        println!(
            "box {n:>2}x{n:<2}  cells {:>5}  edges {:>5}  h {:.4}  regularity {:.4}",
            m.num_cells(),
            m.num_edges(),
            m.max_diameter(),
            check_admissibility(&m)?
        );
    }

    let m = build_ssf_mesh(0.5, 0.5, 0.1, 0.1, 0.025, 0.0125)?;
    println!(
        "filter  cells {}  area {:.6}  inlet {:.3}  outlet {:.3}  walls {:.3}",
        m.num_cells(),
        m.total_area(),
        m.boundary_tag_length(BoundaryTag::Inlet),
        m.boundary_tag_length(BoundaryTag::Outlet),
        m.boundary_tag_length(BoundaryTag::Wall),
    );
    Ok(())
}
