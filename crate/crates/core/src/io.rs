//! CSV / JSON readers and writers for clouds, planes, lattices and tallies.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{input, Error, Result};
use crate::geometry::{AffinePlane, PlaneFamily, PointCloud};
use crate::incidence::IncidenceTally;
use crate::projections::{GridHeader, GridMeasure};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn write_points_csv<W: Write>(w: W, points: &PointCloud) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record((0..points.d()).map(|i| format!("x{i}")))?;
    for p in points.iter() {
        out.write_record(p.iter().map(|c| c.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Header row `x0,x1,...`; separation and radius are measured.
pub fn read_points_csv<R: Read>(r: R) -> Result<PointCloud> {
    let mut rdr = csv::Reader::from_reader(r);
    let d = rdr.headers()?.len();
    let mut coords = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != d {
            return Err(Error::Parse("ragged point row".into()));
        }
        for f in rec.iter() {
            coords.push(f.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
        }
    }
    if d == 0 || coords.is_empty() {
        return input("point file is empty");
    }
    PointCloud::from_coords(d, coords)
}

pub fn save_points(path: &Path, points: &PointCloud) -> Result<()> {
    write_points_csv(create(path)?, points)
}

pub fn load_points(path: &Path) -> Result<PointCloud> {
    read_points_csv(open(path)?)
}

/// Lines in the plane as `dx,dy,ox,oy` (unit direction and the offset orthogonal to it).
pub fn write_lines_csv<W: Write>(w: W, lines: &PlaneFamily) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["dx", "dy", "ox", "oy"])?;
    for l in &lines.planes {
        if l.d() != 2 || l.n() != 1 {
            return input("line CSV holds lines in the plane only");
        }
        let b = l.basis_vector(0);
        let o = l.offset();
        out.write_record([b[0], b[1], o[0], o[1]].iter().map(|c| c.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_lines_csv<R: Read>(r: R, separation: f64) -> Result<PlaneFamily> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut planes = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::Parse("line rows need dx,dy,ox,oy".into()));
        }
        planes.push(AffinePlane::through(&v[2..4], &[v[0..2].to_vec()])?);
    }
    PlaneFamily::new(planes, separation)
}

/// `.csv` files are read as planar lines, anything else as a JSON plane family.
pub fn load_planes(path: &Path) -> Result<PlaneFamily> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_lines_csv(open(path)?, 0.0)
    } else {
        Ok(serde_json::from_reader(open(path)?)?)
    }
}

pub fn save_planes(path: &Path, planes: &PlaneFamily) -> Result<()> {
    if path.extension().is_some_and(|e| e == "csv") {
        let mut w = create(path)?;
        write_lines_csv(&mut w, planes)?;
        w.flush()?;
        Ok(())
    } else {
        write_json(path, planes)
    }
}

/// JSON header on the first line, then one comma-separated row per last-axis run.
pub fn write_grid<W: Write>(mut w: W, mu: &GridMeasure) -> Result<()> {
    serde_json::to_writer(&mut w, &mu.header())?;
    w.write_all(b"\n")?;
    let row = *mu.shape().last().expect("d >= 1");
    for chunk in mu.values().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        w.write_all(line.join(",").as_bytes())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_grid<R: Read>(r: R) -> Result<GridMeasure> {
    let mut lines = BufReader::new(r).lines();
    let head = lines.next().ok_or_else(|| Error::Parse("empty grid file".into()))??;
    let header: GridHeader = serde_json::from_str(&head)?;
    let mut values = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        for f in line.split(',') {
            values.push(f.trim().parse::<f64>().map_err(|e| Error::Parse(e.to_string()))?);
        }
    }
    if header.origin.len() != header.d {
        return Err(Error::Parse("grid header dimension mismatch".into()));
    }
    GridMeasure::new(header.h, header.origin, header.shape, values)
}

pub fn save_grid(path: &Path, mu: &GridMeasure) -> Result<()> {
    let mut w = create(path)?;
    write_grid(&mut w, mu)?;
    w.flush()?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<GridMeasure> {
    read_grid(open(path)?)
}

/// Incident pairs as `point,plane`, grouped by plane.
pub fn write_tally_csv<W: Write>(w: W, tally: &IncidenceTally) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["point", "plane"])?;
    for (p, v) in tally.pairs() {
        out.write_record([p.to_string(), v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_tally(path: &Path, tally: &IncidenceTally) -> Result<()> {
    let mut w = create(path)?;
    write_tally_csv(&mut w, tally)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip() {
        let p = PointCloud::from_points(&[vec![0.1, 0.2], vec![-0.3, 1.0 / 3.0]]).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&mut buf, &p).unwrap();
        let q = read_points_csv(&buf[..]).unwrap();
        assert_eq!(p.coords(), q.coords());
    }

    #[test]
    fn grid_round_trip() {
        let mu = GridMeasure::from_fn(0.25, vec![0.0, 1.0], vec![3, 4], |x| x[0] + x[1]).unwrap();
        let mut buf = Vec::new();
        write_grid(&mut buf, &mu).unwrap();
        assert_eq!(read_grid(&buf[..]).unwrap(), mu);
    }

    #[test]
    fn lines_round_trip() {
        let fam = PlaneFamily::new(vec![AffinePlane::line2(0.3, 0.2), AffinePlane::line2(-1.0, 0.0)], 0.1).unwrap();
        let mut buf = Vec::new();
        write_lines_csv(&mut buf, &fam).unwrap();
        let back = read_lines_csv(&buf[..], 0.1).unwrap();
        for (a, b) in fam.planes.iter().zip(&back.planes) {
            assert!(crate::geometry::grassmann_distance(a, b).unwrap() < 1e-12);
        }
    }
}
