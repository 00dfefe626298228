#pragma once

#include <string>
#include <vector>

#include "jepa_fer/eval/metrics.hpp"
#include "jepa_fer/eval/protocol.hpp"

namespace jepa_fer::eval {

/// One JSON object per report: dataset, [source_dataset], voting, [mode],
/// labels, folds [{fold, uar, war, evaluated, dropped, excluded_classes}],
/// mean_uar, mean_war, std_uar, std_war, dropped.
std::string metrics_json(const std::vector<MetricsReport>& reports);

/// Square table with a header row and column of class names; rows are ground
/// truth. Whole numbers print without a fraction.
std::string confusion_csv(const std::vector<std::string>& labels, const std::vector<double>& values);
std::string confusion_csv(const std::vector<std::string>& labels, const ConfusionMatrix& cm);

/// Standalone SVG heatmap of a confusion matrix (row-normalized shading,
/// raw values printed in the cells).
std::string confusion_svg(const std::vector<std::string>& labels, const std::vector<double>& values,
                          const std::string& title);

/// Columns x,y,label.
std::string pca_csv(const Pca2& pca, const std::vector<std::string>& labels);

}  // namespace jepa_fer::eval
