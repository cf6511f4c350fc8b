//! CSV slices of a field for external plotting.

use std::fmt::Write;

use gkw_core::grid::Field;

/// Per component: a line along the first axis and, for m ≥ 2, the plane of
/// the first two axes. Remaining indices are held at zero.
pub fn slices(f: &Field) -> Vec<(String, Vec<u8>)> {
    let grid = f.grid();
    let m = grid.dim();
    let mut out = Vec::new();
    for c in 0..f.n() {
        let mut line = String::from("x1,value\n");
        let mut index = vec![0; m];
        for i in 0..grid.points()[0] {
            index[0] = i;
            let node = grid.flat_index(&index);
            let x = grid.coordinates(node);
            writeln!(line, "{:e},{:e}", x[0], f.node(node)[c]).expect("string write");
        }
        out.push((format!("xi{}_line.csv", c + 1), line.into_bytes()));

        if m >= 2 {
            let mut plane = String::from("x1,x2,value\n");
            let mut index = vec![0; m];
            for i in 0..grid.points()[0] {
                for j in 0..grid.points()[1] {
                    index[0] = i;
                    index[1] = j;
                    let node = grid.flat_index(&index);
                    let x = grid.coordinates(node);
                    writeln!(plane, "{:e},{:e},{:e}", x[0], x[1], f.node(node)[c])
                        .expect("string write");
                }
            }
            out.push((format!("xi{}_plane.csv", c + 1), plane.into_bytes()));
        }
    }
    out
}
