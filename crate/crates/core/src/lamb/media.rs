//! Plate material database.
//!
//! A comma-separated table with a header row naming the columns and their
//! units. Accepted headers (case-insensitive):
//!
//! | column        | accepted names                          |
//! |---------------|-----------------------------------------|
//! | name          | `name`                                  |
//! | longitudinal  | `c_l_m_s`, `c_l_km_s`                   |
//! | transverse    | `c_t_m_s`, `c_t_km_s`                   |
//! | density       | `density_kg_m3`, `density_g_cm3`        |
//!
//! Lines starting with `#` are comments.

use crate::error::{Error, Result};

use super::MediumSpec;

const BUILTIN: &str = include_str!("../../data/media.csv");

/// One material row, always in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct MediumRecord {
    pub name: String,
    pub c_l: f64,
    pub c_t: f64,
    pub density: f64,
}

impl MediumRecord {
    /// A plate of this material.
    pub fn plate(&self, thickness: f64, attenuation_ratio: f64) -> Result<MediumSpec> {
        MediumSpec::new(self.name.clone(), self.c_l, self.c_t, self.density, thickness, attenuation_ratio)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MediumDb {
    records: Vec<MediumRecord>,
}

#[derive(Clone, Copy)]
enum Column {
    Name,
    Longitudinal(f64),
    Transverse(f64),
    Density(f64),
}

fn column(header: &str) -> Option<Column> {
    Some(match header.trim().to_ascii_lowercase().as_str() {
        "name" => Column::Name,
        "c_l_m_s" => Column::Longitudinal(1.0),
        "c_l_km_s" => Column::Longitudinal(1e3),
        "c_t_m_s" => Column::Transverse(1.0),
        "c_t_km_s" => Column::Transverse(1e3),
        "density_kg_m3" => Column::Density(1.0),
        "density_g_cm3" => Column::Density(1e3),
        _ => return None,
    })
}

impl MediumDb {
    /// The seven materials shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("bundled media table is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
        let mut columns = Vec::with_capacity(headers.len());
        for h in headers.iter() {
            columns.push(column(h).ok_or_else(|| Error::parse(1, format!("unknown column '{h}'")))?);
        }
        let has = |pred: fn(&Column) -> bool| columns.iter().filter(|c| pred(c)).count() == 1;
        if !(has(|c| matches!(c, Column::Name))
            && has(|c| matches!(c, Column::Longitudinal(_)))
            && has(|c| matches!(c, Column::Transverse(_)))
            && has(|c| matches!(c, Column::Density(_))))
        {
            return Err(Error::parse(1, "need exactly one each of name, c_l, c_t and density columns"));
        }

        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(line, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize);
            let mut rec = MediumRecord { name: String::new(), c_l: 0.0, c_t: 0.0, density: 0.0 };
            for (col, field) in columns.iter().zip(row.iter()) {
                let number = |scale: f64| -> Result<f64> {
                    let v: f64 = field
                        .parse()
                        .map_err(|_| Error::parse(line, format!("'{field}' is not a number")))?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::parse(line, format!("'{field}' must be positive")));
                    }
                    Ok(v * scale)
                };
                match *col {
                    Column::Name => rec.name = field.to_string(),
                    Column::Longitudinal(s) => rec.c_l = number(s)?,
                    Column::Transverse(s) => rec.c_t = number(s)?,
                    Column::Density(s) => rec.density = number(s)?,
                }
            }
            if rec.name.is_empty() {
                return Err(Error::parse(line, "empty material name"));
            }
            if rec.c_t >= rec.c_l {
                return Err(Error::parse(line, "transverse speed must be below longitudinal speed"));
            }
            if records.iter().any(|r: &MediumRecord| r.name.eq_ignore_ascii_case(&rec.name)) {
                return Err(Error::parse(line, format!("duplicate material '{}'", rec.name)));
            }
            records.push(rec);
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[MediumRecord] {
        &self.records
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Option<&MediumRecord> {
        self.records.iter().find(|r| r.name.eq_ignore_ascii_case(name.trim()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_all_rows_in_si() {
        let db = MediumDb::builtin();
        assert_eq!(db.len(), 7);
        let acrylic = db.get("acrylic glass").unwrap();
        assert_eq!(acrylic.c_l, 2700.0);
        assert_eq!(acrylic.c_t, 1300.0);
        assert_eq!(acrylic.density, 1180.0);
        let quartz = db.get("Quartz glass").unwrap();
        assert_eq!((quartz.c_l, quartz.c_t), (5570.0, 3520.0));
        assert!(db.get("Hard rubber plastic").is_some());
    }

    #[test]
    fn si_headers_pass_through() {
        let db = MediumDb::parse("name,c_l_m_s,c_t_m_s,density_kg_m3\nFoo,2000,1000,900\n").unwrap();
        assert_eq!(db.records()[0].c_l, 2000.0);
    }

    #[test]
    fn rejects_malformed() {
        assert!(MediumDb::parse("name,c_l_m_s,c_t_m_s\nFoo,1,2\n").is_err());
        assert!(MediumDb::parse("name,speed,c_t_m_s,density_kg_m3\n").is_err());
        let err = MediumDb::parse("name,c_l_m_s,c_t_m_s,density_kg_m3\nFoo,abc,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        assert!(MediumDb::parse("name,c_l_m_s,c_t_m_s,density_kg_m3\nFoo,1,2,1\n").is_err());
        assert!(MediumDb::parse("name,c_l_m_s,c_t_m_s,density_kg_m3\nFoo,2,1,1\nfoo,2,1,1\n").is_err());
        assert!(MediumDb::parse("name,c_l_m_s,c_t_m_s,density_kg_m3\nFoo,2,1\n").is_err());
    }
}
