#pragma once

#include "semiflow/manifold.hpp"
#include "semiflow/realization.hpp"
#include "semiflow/sensitivity.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace semiflow {

/// JSON text with every number printed as %.17g; NaN and infinities
/// become null. Object keys come out sorted, so equal documents give equal
/// bytes.
std::string dump_json(const nlohmann::json& j, int indent = 2);

/// Writes to a temporary file in the same directory, then renames.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// Long format `t,xi,value`.
std::string trajectory_csv(const SolveReport& r);

nlohmann::json to_json(const SolveReport& r);
nlohmann::json to_json(const TangencyReport& t);
nlohmann::json to_json(const LifetimeReport& l);
nlohmann::json to_json(const DomainOrderEstimate& e);
nlohmann::json to_json(const FdCheckResult& f);
nlohmann::json to_json(const RegularityReport& r);
nlohmann::json to_json(const Eigen::VectorXd& v);

/// [{t, node, base_csv_ref, first: [...], second: [...]}, ...] in node
/// order; arrays follow the direction order.
nlohmann::json jets_json(const JetSequence& js, const std::vector<std::size_t>& nodes, const std::string& base_csv_ref);

}  // namespace semiflow
