#include "icuflow/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "icuflow/csv.hpp"
#include "icuflow/errors.hpp"
#include "icuflow/rng.hpp"

namespace icuflow {
namespace {

std::string fmt(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return std::string(buf);
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

struct StayPlan {
  std::int64_t stay_id = 0;
  int age = 0;
  std::string sex;
  double severity = 0.0;
  bool expired = false;
  double apache_mortality = 0.0;
  double apache_los = 0.0;
  double actual_los_days = 0.0;
};

const std::vector<std::string> kLabNames = {
    "lactate", "creatinine", "WBC x 1000", "platelets x 1000",
    "bicarbonate", "sodium", "potassium", "BUN",
};

const std::vector<std::string> kDrugPool = {
    "norepinephrine", "vancomycin", "propofol", "fentanyl",
    "insulin", "furosemide", "heparin", "piperacillin-tazobactam",
};

const std::vector<std::string> kApsVars = {
    "heartrate", "meanbp", "temperature", "respiratoryrate",
    "wbc", "creatinine", "sodium", "glucose",
};

std::string physician_note(const StayPlan& plan) {
  std::string text = "Physician progress note. ";
  if (plan.severity > 0.6) {
    text +=
        "Patient remains critically ill with multi-organ dysfunction. "
        "Hemodynamics require vasopressor support and lactate is rising. "
        "Prognosis guarded; goals of care discussed with family.";
  } else if (plan.severity > 0.35) {
    text +=
        "Patient stable but requires close monitoring. Weaning sedation, "
        "oxygen requirements moderate. Plan to reassess in the morning.";
  } else {
    text +=
        "Patient improving steadily. Hemodynamically stable off pressors, "
        "tolerating diet. Anticipate transfer to step-down unit.";
  }
  return text;
}

std::string nursing_note(const StayPlan& plan) {
  if (plan.severity > 0.5) {
    return "Nursing note: patient agitated overnight, required increased "
           "sedation. Urine output marginal. Family at bedside.";
  }
  return "Nursing note: restful night, vital signs within ordered "
         "parameters. No acute events.";
}

}  // namespace

std::vector<std::string> synthetic_file_names() {
  return {"patient.csv",   "lab.csv",          "vitalPeriodic.csv",
          "note.csv",      "medication.csv",   "apacheApsVar.csv",
          "apachePatientResult.csv"};
}

void generate_synthetic(const std::filesystem::path& out_dir, const SyntheticOptions& options) {
  if (options.n_stays == 0) throw ConfigError("synthetic cohort size must be positive");
  if (options.expired_fraction < 0.0 || options.expired_fraction > 1.0) {
    throw ConfigError("expired fraction must lie in [0, 1]");
  }
  std::filesystem::create_directories(out_dir);

  const auto n_expired =
      static_cast<std::size_t>(std::llround(options.expired_fraction * static_cast<double>(options.n_stays)));

  std::vector<StayPlan> plans;
  plans.reserve(options.n_stays);
  for (std::size_t i = 0; i < options.n_stays; ++i) {
    Rng rng(mix64(options.seed, 1000 + static_cast<std::uint64_t>(i)));
    StayPlan plan;
    plan.stay_id = 100000 + static_cast<std::int64_t>(i);
    plan.age = 35 + static_cast<int>(rng.bounded(55));
    plan.sex = rng.chance(0.5) ? "Male" : "Female";
    plan.expired = i < n_expired;
    // Bands overlap near 0.5 so classification accuracy lands well above
    // chance without saturating at 100 across whole runs.
    plan.severity = plan.expired ? rng.uniform(0.45, 0.95) : rng.uniform(0.05, 0.55);
    plan.apache_mortality = clamp(plan.severity + rng.gauss(0.0, 0.02), 0.01, 0.99);
    plan.actual_los_days = clamp(2.0 + 10.0 * plan.severity + rng.gauss(0.0, 1.2), 0.25, 60.0);
    plan.apache_los = clamp(plan.actual_los_days + rng.gauss(0.0, 0.6), 0.25, 60.0);
    plans.push_back(plan);
  }

  CsvTable patient;
  patient.header = {"patientunitstayid", "age", "gender", "unitdischargestatus", "unitdischargeoffset"};
  CsvTable lab;
  lab.header = {"patientunitstayid", "labresultoffset", "labname", "labresult", "labmeasurenamesystem"};
  CsvTable vitals;
  vitals.header = {"patientunitstayid", "observationoffset", "heartrate", "systemicsystolic", "sao2", "temperature"};
  CsvTable note;
  note.header = {"patientunitstayid", "noteoffset", "notetype", "notetext"};
  CsvTable medication;
  medication.header = {"patientunitstayid", "drugstartoffset", "drugname", "dosage"};
  CsvTable aps;
  aps.header = {"patientunitstayid"};
  aps.header.insert(aps.header.end(), kApsVars.begin(), kApsVars.end());
  CsvTable apache_result;
  apache_result.header = {"patientunitstayid", "predictedicumortality", "predictediculos"};

  for (const auto& plan : plans) {
    Rng rng(mix64(options.seed, mix64(0x7461626c65, static_cast<std::uint64_t>(plan.stay_id))));
    const std::string sid = std::to_string(plan.stay_id);
    const auto discharge_offset = static_cast<std::int64_t>(std::llround(plan.actual_los_days * 1440.0));

    patient.rows.push_back({sid, plan.age >= 90 ? std::string("> 89") : std::to_string(plan.age), plan.sex,
                            plan.expired ? "Expired" : "Alive", std::to_string(discharge_offset)});

    // Vitals trend with severity: sicker stays run tachycardic, hypotensive
    // and desaturated. 14 samples so the last-10 window has something to cut.
    for (int k = 0; k < 14; ++k) {
      const auto offset = 30 + 45 * k;
      const double hr = 72.0 + 55.0 * plan.severity + rng.gauss(0.0, 4.0);
      const double sbp = 128.0 - 45.0 * plan.severity + rng.gauss(0.0, 5.0);
      const double spo2 = clamp(99.0 - 9.0 * plan.severity + rng.gauss(0.0, 1.0), 70.0, 100.0);
      const double temp = 36.6 + 1.6 * plan.severity + rng.gauss(0.0, 0.2);
      // One mid-series row leaves systolic blank so gap filling has work.
      const bool blank_sbp = k == 6;
      vitals.rows.push_back({sid, std::to_string(offset), fmt(hr, 1), blank_sbp ? "" : fmt(sbp, 1),
                             fmt(spo2, 1), fmt(temp, 1)});
    }

    for (std::size_t li = 0; li < kLabNames.size(); ++li) {
      const int draws = 2;
      for (int d = 0; d < draws; ++d) {
        const auto offset = 60 + 240 * d + static_cast<std::int64_t>(li) * 7;
        double base = 0.0;
        switch (li) {
          case 0: base = 0.8 + 6.0 * plan.severity; break;   // lactate mmol/L
          case 1: base = 0.7 + 2.5 * plan.severity; break;   // creatinine mg/dL
          case 2: base = 7.0 + 14.0 * plan.severity; break;  // WBC
          case 3: base = 260.0 - 140.0 * plan.severity; break;
          case 4: base = 26.0 - 8.0 * plan.severity; break;
          case 5: base = 138.0 + rng.gauss(0.0, 2.0); break;
          case 6: base = 4.0 + 0.8 * plan.severity; break;
          default: base = 14.0 + 40.0 * plan.severity; break;
        }
        const double value = base + rng.gauss(0.0, base * 0.03 + 0.01);
        lab.rows.push_back({sid, std::to_string(offset), kLabNames[li], fmt(value, 2), "unit"});
      }
    }

    note.rows.push_back({sid, "120", "Physician Progress Note", physician_note(plan)});
    note.rows.push_back({sid, "300", "Nursing Note", nursing_note(plan)});
    if (rng.chance(0.5)) {
      note.rows.push_back({sid, "420", "Respiratory Therapy",
                           plan.severity > 0.5 ? "RT note: high ventilator support, FiO2 increased."
                                               : "RT note: weaning trial tolerated well."});
    }

    const std::size_t n_drugs = 3 + rng.bounded(4);
    for (std::size_t d = 0; d < n_drugs; ++d) {
      const auto& drug = kDrugPool[rng.bounded(kDrugPool.size())];
      const auto offset = 90 + 120 * static_cast<std::int64_t>(d);
      medication.rows.push_back({sid, std::to_string(offset), drug, fmt(1.0 + rng.unit() * 4.0, 1) + " mg"});
    }

    std::vector<std::string> aps_row = {sid};
    for (std::size_t v = 0; v < kApsVars.size(); ++v) {
      double value = 0.0;
      switch (v) {
        case 0: value = 70.0 + 60.0 * plan.severity; break;
        case 1: value = 90.0 - 30.0 * plan.severity; break;
        case 2: value = 36.5 + 1.8 * plan.severity; break;
        case 3: value = 14.0 + 16.0 * plan.severity; break;
        case 4: value = 7.0 + 14.0 * plan.severity; break;
        case 5: value = 0.7 + 2.5 * plan.severity; break;
        case 6: value = 138.0; break;
        default: value = 110.0 + 120.0 * plan.severity; break;
      }
      aps_row.push_back(fmt(value + rng.gauss(0.0, 0.5), 1));
    }
    aps.rows.push_back(aps_row);

    apache_result.rows.push_back({sid, fmt(plan.apache_mortality, 4), fmt(plan.apache_los, 2)});
  }

  write_csv_file(out_dir / "patient.csv", patient.header, patient.rows);
  write_csv_file(out_dir / "lab.csv", lab.header, lab.rows);
  write_csv_file(out_dir / "vitalPeriodic.csv", vitals.header, vitals.rows);
  write_csv_file(out_dir / "note.csv", note.header, note.rows);
  write_csv_file(out_dir / "medication.csv", medication.header, medication.rows);
  write_csv_file(out_dir / "apacheApsVar.csv", aps.header, aps.rows);
  write_csv_file(out_dir / "apachePatientResult.csv", apache_result.header, apache_result.rows);
}

}  // namespace icuflow
