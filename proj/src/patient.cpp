#include "icuflow/patient.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace icuflow {
namespace {

std::string lowered(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

}  // namespace

const char* to_string(Sex sex) {
  switch (sex) {
    case Sex::male: return "male";
    case Sex::female: return "female";
    default: return "other";
  }
}

const char* to_string(AuthorRole role) {
  switch (role) {
    case AuthorRole::physician: return "physician";
    case AuthorRole::nurse: return "nurse";
    default: return "other";
  }
}

const char* to_string(OutcomeStatus status) {
  return status == OutcomeStatus::expired ? "expired" : "survived";
}

Sex sex_from_string(const std::string& text) {
  const std::string low = lowered(text);
  if (low == "male" || low == "m") return Sex::male;
  if (low == "female" || low == "f") return Sex::female;
  return Sex::other;
}

AuthorRole author_role_from_string(const std::string& text) {
  const std::string low = lowered(text);
  if (low.find("physician") != std::string::npos || low.find("md") != std::string::npos ||
      low.find("doctor") != std::string::npos) {
    return AuthorRole::physician;
  }
  if (low.find("nurs") != std::string::npos || low.find("rn") != std::string::npos) {
    return AuthorRole::nurse;
  }
  return AuthorRole::other;
}

OutcomeStatus outcome_status_from_string(const std::string& text) {
  const std::string low = lowered(text);
  if (low.find("expired") != std::string::npos || low == "dead" || low == "deceased") {
    return OutcomeStatus::expired;
  }
  return OutcomeStatus::survived;
}

std::string Demographics::summary() const {
  std::ostringstream out;
  out << "age: " << age << "; sex: " << to_string(sex);
  return out.str();
}

}  // namespace icuflow
