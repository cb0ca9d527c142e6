//! Legacy VTK unstructured-grid dump of a subdomain's tetrahedra.

use std::fmt::Write as _;
use std::path::Path;

use super::{SubdomainMesh, TetTag};
use crate::error::{Error, Result};

/// Cell-data tag values: 0 material, 1 plasma, 2 interface.
pub fn tag_code(tag: TetTag) -> u8 {
    match tag {
        TetTag::Interior => 0,
        TetTag::Exterior => 1,
        TetTag::Interface => 2,
    }
}

pub fn mesh_to_vtk(mesh: &SubdomainMesh) -> String {
    let mut s = String::new();
    let n = mesh.node_count();
    let nt = mesh.tet_count();
    s.push_str(
        "# vtk DataFile Version 3.0\nifepic subdomain mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n",
    );
    let _ = writeln!(s, "POINTS {n} double");
    for id in 0..n {
        let p = mesh.local_node_position(id);
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    let _ = writeln!(s, "CELLS {nt} {}", nt * 5);
    for lc in 0..mesh.cell_count() {
        for t in 0..5 {
            let v = mesh.tet_nodes(lc, t);
            let _ = writeln!(s, "4 {} {} {} {}", v[0], v[1], v[2], v[3]);
        }
    }
    let _ = writeln!(s, "CELL_TYPES {nt}");
    for _ in 0..nt {
        s.push_str("10\n");
    }
    let _ = writeln!(
        s,
        "CELL_DATA {nt}\nSCALARS region int 1\nLOOKUP_TABLE default"
    );
    for tag in &mesh.tags {
        let _ = writeln!(s, "{}", tag_code(*tag));
    }
    s
}

pub fn write_mesh_vtk(mesh: &SubdomainMesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_vtk(mesh)).map_err(|e| Error::io(path, e))
}
