//! Legacy ASCII VTK output.

use std::io::{self, Write};

use crate::assembly::Space;
use crate::mesh::{TetMesh, Vec3};
use crate::operators::DiscreteField;

const VTK_TETRA: u8 = 10;

fn write_grid<W: Write>(mesh: &TetMesh, title: &str, out: &mut W) -> io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    let nt = mesh.n_tets();
    writeln!(out, "CELLS {} {}", nt, 5 * nt)?;
    for t in mesh.tets() {
        writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
    }
    writeln!(out, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(out, "{VTK_TETRA}")?;
    }
    Ok(())
}

fn write_vectors<W: Write>(name: &str, values: &[Vec3], out: &mut W) -> io::Result<()> {
    writeln!(out, "VECTORS {name} double")?;
    for v in values {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    Ok(())
}

/// Mesh only.
pub fn write_mesh<W: Write>(mesh: &TetMesh, out: &mut W) -> io::Result<()> {
    write_grid(mesh, "edgefem mesh", out)?;
    writeln!(out, "CELL_DATA {}", mesh.n_tets())?;
    writeln!(out, "SCALARS volume double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for t in 0..mesh.n_tets() {
        writeln!(out, "{}", mesh.tet_volume(t))?;
    }
    Ok(())
}

/// Vertex values of a vector field, averaged over the cells sharing each
/// vertex (the fields are discontinuous across faces).
pub fn vertex_average(field: &DiscreteField) -> Vec<Vec3> {
    let mesh = field.system().mesh();
    let mut sum = vec![Vec3::zeros(); mesh.n_vertices()];
    let mut count = vec![0usize; mesh.n_vertices()];
    for (c, tet) in mesh.tets().iter().enumerate() {
        let geo = field.system().geometry(c);
        for (k, &v) in tet.iter().enumerate() {
            let mut bary = [0.0; 4];
            bary[k] = 1.0;
            sum[v] += field.vector_value(c, &geo, &bary);
            count[v] += 1;
        }
    }
    sum.iter()
        .zip(count)
        .map(|(s, n)| s / n.max(1) as f64)
        .collect()
}

/// Mesh with a Nédélec or Raviart–Thomas field as point vectors; Nédélec
/// fields also carry their cellwise curl.
pub fn write_field<W: Write>(field: &DiscreteField, name: &str, out: &mut W) -> io::Result<()> {
    let mesh = field.system().mesh();
    write_grid(mesh, &format!("edgefem field {name}"), out)?;
    writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
    write_vectors(name, &vertex_average(field), out)?;
    if field.space() == Space::Nedelec {
        let curls: Vec<Vec3> = (0..mesh.n_tets())
            .map(|c| field.curl(c, &field.system().geometry(c)))
            .collect();
        writeln!(out, "CELL_DATA {}", mesh.n_tets())?;
        write_vectors(&format!("curl_{name}"), &curls, out)?;
    }
    Ok(())
}
