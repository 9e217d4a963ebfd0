//! Derived clinical variables: eGFR, BMI class, glycaemic and lipid flags.

use crate::cohort::dataset::Dataset;
use crate::cohort::schema::{ColumnKind, ColumnSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

/// CKD-EPI style creatinine equation, ml/min/1.73m².
///
/// `scr` in mg/dl, `age` in years.
pub fn compute_egfr(scr: f64, age: f64, sex: Sex) -> Result<f64> {
    if !(scr > 0.0) || !scr.is_finite() {
        return Err(Error::Domain(format!("serum creatinine must be positive, got {scr}")));
    }
    if !(age >= 0.0) {
        return Err(Error::Domain(format!("age must be nonnegative, got {age}")));
    }
    let (scale, knee, low_exp) = match sex {
        Sex::Female => (144.0, 0.7, -0.329),
        Sex::Male => (141.0, 0.9, -0.411),
    };
    let exponent = if scr <= knee { low_exp } else { -1.209 };
    Ok(scale * (scr / knee).powf(exponent) * 0.993_f64.powf(age))
}

/// Body-mass index, kg/m².
pub fn bmi(weight_kg: f64, height_m: f64) -> Result<f64> {
    if !(height_m > 0.0) {
        return Err(Error::Domain(format!("height must be positive, got {height_m}")));
    }
    Ok(weight_kg / (height_m * height_m))
}

/// Adult BMI classes with the Asian cut points 18.5 / 24 / 28 kg/m².
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmiClass {
    Underweight,
    Normal,
    Overweight,
    Obese,
}

pub const BMI_CLASSES: [&str; 4] = ["underweight", "normal", "overweight", "obese"];

impl BmiClass {
    pub fn from_bmi(bmi: f64) -> Self {
        if bmi < 18.5 {
            BmiClass::Underweight
        } else if bmi < 24.0 {
            BmiClass::Normal
        } else if bmi < 28.0 {
            BmiClass::Overweight
        } else {
            BmiClass::Obese
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

pub fn is_hyperglycemic(hba1c_percent: f64) -> bool {
    hba1c_percent >= 7.0
}

pub fn is_dyslipidemic(hdl_mmol: f64, sex: Sex) -> bool {
    match sex {
        Sex::Male => hdl_mmol <= 1.0,
        Sex::Female => hdl_mmol <= 1.3,
    }
}

/// Columns feeding [`derive_clinical_flags`]. Each derived variable is
/// appended only when all of its inputs are named.
#[derive(Debug, Clone, Default)]
pub struct ClinicalColumns {
    pub weight: Option<String>,
    pub height: Option<String>,
    pub hba1c: Option<String>,
    pub hdl: Option<String>,
    pub sex: Option<String>,
}

/// Reads the sex of each row from a categorical column whose categories are
/// named male/female (any case, or M/F) or from a 0/1 column where 1 = male.
fn sex_column(ds: &Dataset, name: &str) -> Result<Vec<Option<Sex>>> {
    let j = ds.require_column(name)?;
    let col = ds.column(j);
    let decode: Box<dyn Fn(f64) -> Result<Sex>> = match col.kind {
        ColumnKind::Categorical => {
            let cats: Vec<Option<Sex>> = col
                .categories
                .iter()
                .map(|c| match c.to_ascii_lowercase().as_str() {
                    "male" | "m" => Some(Sex::Male),
                    "female" | "f" => Some(Sex::Female),
                    _ => None,
                })
                .collect();
            let name = col.name.clone();
            Box::new(move |v| {
                cats[v as usize]
                    .ok_or_else(|| Error::Domain(format!("column `{name}`: category is neither male nor female")))
            })
        }
        _ => {
            let name = col.name.clone();
            Box::new(move |v| match v {
                1.0 => Ok(Sex::Male),
                0.0 => Ok(Sex::Female),
                _ => Err(Error::Domain(format!(
                    "column `{name}`: sex must be coded 1 = male, 0 = female"
                ))),
            })
        }
    };
    (0..ds.n_rows())
        .map(|i| ds.value(i, j).map(&decode).transpose())
        .collect()
}

fn continuous_column(ds: &Dataset, name: &str) -> Result<Vec<Option<f64>>> {
    let j = ds.require_column(name)?;
    if ds.column(j).kind != ColumnKind::Continuous {
        return Err(Error::Domain(format!("column `{name}` must be continuous")));
    }
    Ok((0..ds.n_rows()).map(|i| ds.value(i, j)).collect())
}

/// Appends BMI, BMI class, hyperglycaemia and dyslipidaemia columns.
///
/// Rows with a missing input get a missing derived value.
pub fn derive_clinical_flags(ds: &Dataset, cols: &ClinicalColumns) -> Result<Dataset> {
    let mut out = ds.clone();
    let mut added = Vec::new();

    if let (Some(w), Some(h)) = (&cols.weight, &cols.height) {
        let weight = continuous_column(ds, w)?;
        let height = continuous_column(ds, h)?;
        let values = weight
            .iter()
            .zip(&height)
            .map(|(w, h)| match (w, h) {
                (Some(w), Some(h)) => bmi(*w, *h).map(Some),
                _ => Ok(None),
            })
            .collect::<Result<Vec<_>>>()?;
        let classes = values
            .iter()
            .map(|b| b.map(|b| BmiClass::from_bmi(b).index() as f64))
            .collect();
        out.push_column(ColumnSpec::continuous("BMI").with_unit("kg/m2"), values)?;
        out.push_column(ColumnSpec::categorical("BMI_class", BMI_CLASSES), classes)?;
        added.extend(["BMI", "BMI_class"]);
    }

    if let Some(a) = &cols.hba1c {
        let values = continuous_column(ds, a)?
            .into_iter()
            .map(|v| v.map(|v| f64::from(u8::from(is_hyperglycemic(v)))))
            .collect();
        out.push_column(ColumnSpec::binary("Hyperglycemia"), values)?;
        added.push("Hyperglycemia");
    }

    if let (Some(hdl), Some(sex)) = (&cols.hdl, &cols.sex) {
        let hdl = continuous_column(ds, hdl)?;
        let sex = sex_column(ds, sex)?;
        let values = hdl
            .iter()
            .zip(&sex)
            .map(|(h, s)| match (h, s) {
                (Some(h), Some(s)) => Some(f64::from(u8::from(is_dyslipidemic(*h, *s)))),
                _ => None,
            })
            .collect();
        out.push_column(ColumnSpec::binary("Dyslipidemia"), values)?;
        added.push("Dyslipidemia");
    }

    out.log(format!("derive_clinical_flags: added [{}]", added.join(", ")));
    Ok(out)
}

/// Appends an `eGFR` column computed from creatinine, age and sex.
pub fn derive_egfr(ds: &Dataset, scr: &str, age: &str, sex: &str, name: &str) -> Result<Dataset> {
    let scr = continuous_column(ds, scr)?;
    let age = continuous_column(ds, age)?;
    let sex = sex_column(ds, sex)?;
    let values = (0..ds.n_rows())
        .map(|i| match (scr[i], age[i], sex[i]) {
            (Some(c), Some(a), Some(s)) => compute_egfr(c, a, s).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ds.clone();
    out.push_column(ColumnSpec::continuous(name).with_unit("ml/min/1.73m2"), values)?;
    out.log(format!("derive_egfr: added {name}"));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn egfr_reference_points() {
        assert_eq!(compute_egfr(0.7, 0.0, Sex::Female).unwrap(), 144.0);
        assert_eq!(compute_egfr(0.9, 0.0, Sex::Male).unwrap(), 141.0);
        // 144 * 2^-1.209 * 0.993^60, evaluated independently in double precision
        let v = compute_egfr(1.4, 60.0, Sex::Female).unwrap();
        assert!((v - 40.866_941_586_941_22).abs() < 1e-9, "{v}");
    }

    #[test]
    fn egfr_continuous_at_knee() {
        for (sex, knee) in [(Sex::Female, 0.7), (Sex::Male, 0.9)] {
            // at the knee the ratio is exactly 1, so both branch exponents agree
            let (scale, low_exp) = if sex == Sex::Female {
                (144.0, -0.329)
            } else {
                (141.0, -0.411)
            };
            let age_term = 0.993_f64.powf(50.0);
            let left = scale * 1.0_f64.powf(low_exp) * age_term;
            let right = scale * 1.0_f64.powf(-1.209) * age_term;
            assert_eq!(left, right);
            assert_eq!(compute_egfr(knee, 50.0, sex).unwrap(), left);
            let eps = 1e-9;
            let below = compute_egfr(knee - eps, 50.0, sex).unwrap();
            let above = compute_egfr(knee + eps, 50.0, sex).unwrap();
            assert!((below - above).abs() < 1e-6);
        }
    }

    #[test]
    fn egfr_rejects_nonpositive_creatinine() {
        assert!(matches!(compute_egfr(0.0, 40.0, Sex::Male), Err(Error::Domain(_))));
        assert!(matches!(compute_egfr(-1.0, 40.0, Sex::Male), Err(Error::Domain(_))));
    }

    #[test]
    fn bmi_and_classes() {
        assert_eq!(bmi(72.0, 2.0).unwrap(), 18.0);
        assert!(bmi(70.0, 0.0).is_err());
        assert_eq!(BmiClass::from_bmi(17.0), BmiClass::Underweight);
        assert_eq!(BmiClass::from_bmi(18.5), BmiClass::Normal);
        assert_eq!(BmiClass::from_bmi(24.0), BmiClass::Overweight);
        assert_eq!(BmiClass::from_bmi(28.0), BmiClass::Obese);
    }

    #[test]
    fn flag_thresholds_are_inclusive() {
        assert!(is_hyperglycemic(7.0));
        assert!(!is_hyperglycemic(6.99));
        assert!(is_dyslipidemic(1.0, Sex::Male));
        assert!(!is_dyslipidemic(1.1, Sex::Male));
        assert!(is_dyslipidemic(1.3, Sex::Female));
    }

    #[test]
    fn derive_appends_columns() {
        let ds = Dataset::from_columns(
            vec![
                ColumnSpec::continuous("w"),
                ColumnSpec::continuous("h"),
                ColumnSpec::continuous("a1c"),
                ColumnSpec::continuous("hdl"),
                ColumnSpec::categorical("sex", ["Female", "Male"]),
                ColumnSpec::target("y"),
            ],
            vec![
                vec![Some(72.0), Some(90.0)],
                vec![Some(2.0), None],
                vec![Some(7.0), Some(6.0)],
                vec![Some(1.2), Some(1.2)],
                vec![Some(0.0), Some(1.0)],
                vec![Some(0.0), Some(1.0)],
            ],
            Vec::new(),
        )
        .unwrap();
        let cols = ClinicalColumns {
            weight: Some("w".into()),
            height: Some("h".into()),
            hba1c: Some("a1c".into()),
            hdl: Some("hdl".into()),
            sex: Some("sex".into()),
        };
        let out = derive_clinical_flags(&ds, &cols).unwrap();
        let bmi = out.require_column("BMI").unwrap();
        assert_eq!(out.value(0, bmi), Some(18.0));
        assert_eq!(out.value(1, bmi), None);
        let class = out.require_column("BMI_class").unwrap();
        assert_eq!(out.value(0, class), Some(0.0));
        let hyper = out.require_column("Hyperglycemia").unwrap();
        assert_eq!(out.observed(hyper), vec![1.0, 0.0]);
        let dys = out.require_column("Dyslipidemia").unwrap();
        // female 1.2 <= 1.3, male 1.2 > 1.0
        assert_eq!(out.observed(dys), vec![1.0, 0.0]);

        let out = derive_egfr(&ds, "a1c", "w", "sex", "eGFR").unwrap();
        assert_eq!(out.n_cols(), ds.n_cols() + 1);
    }
}
