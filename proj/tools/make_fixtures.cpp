// Regenerates the golden files under fixtures/v1.
#include <filesystem>
#include <iostream>

#include "hsel/conditions/condition_check.hpp"
#include "hsel/ident/coparents.hpp"
#include "hsel/io/serialize.hpp"
#include "hsel/model/discrete_generators.hpp"
#include "hsel/oracle/oracle.hpp"
#include "hsel/pipeline/pipeline.hpp"

using namespace hsel;

namespace {

void write(const std::filesystem::path& p, const ojson& j) {
  write_text_file(p.string(), j.dump(2) + "\n");
  std::cout << "wrote " << p.string() << '\n';
}

ojson matrix_json(const Eigen::MatrixXd& m) {
  ojson rows = ojson::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    ojson r = ojson::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

// Nonnegative matrices of rank 0, 1 and 2, each with its nonnegative factors.
ojson low_rank_matrices(std::uint64_t seed) {
  Rng rng = make_rng(seed, 0x2A);
  ojson out = ojson::array();
  const std::pair<int, int> shapes[] = {{2, 2}, {3, 3}, {3, 5}, {4, 4}, {5, 3}, {6, 6}};
  for (int rank = 0; rank <= 2; ++rank)
    for (const auto& [r, c] : shapes) {
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(r, std::max(rank, 1)), C = Eigen::MatrixXd::Zero(std::max(rank, 1), c);
      if (rank > 0) {
        for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = std::round(uniform01(rng) * 8.0);
        for (Eigen::Index i = 0; i < C.size(); ++i) C.data()[i] = std::round(uniform01(rng) * 8.0);
        B.col(0).array() += 1.0;
        C.row(0).array() += 1.0;
        if (rank == 2) {
          B(0, 1) = 0.0;
          B(r - 1, 1) += 3.0;
          C(1, 0) = 0.0;
          C(1, c - 1) += 3.0;
        }
      }
      Eigen::MatrixXd T = B * C;
      if (linear_rank(T) != rank) continue;
      out.push_back({{"rank", rank}, {"matrix", matrix_json(T)}, {"left", matrix_json(B)}, {"right", matrix_json(C)}});
    }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "fixtures/v1";
  std::filesystem::create_directories(dir);

  auto f3 = figure3_model(0);
  write(dir / "figure3_model.json", to_json(f3));

  auto rep = check_discrete_conditions(f3);
  ojson verdicts;
  verdicts["verdicts"] = ojson::object();
  for (const auto& [k, v] : rep.verdicts) verdicts["verdicts"][k] = to_string(v);
  verdicts["nodes"] = ojson::array();
  for (const auto& n : rep.nodes) verdicts["nodes"].push_back({{"check", n.check}, {"node", n.node}, {"verdict", to_string(n.verdict)}});
  write(dir / "figure3_verdicts.json", verdicts);

  auto joint = exact_joint(f3, true);
  ojson cop = ojson::object();
  for (int d = 0; d < static_cast<int>(joint.arity()); ++d) {
    auto found = oracle::oracle_minimal_coparents(joint, d);
    if (!found) {
      cop[joint.names()[d]] = nullptr;
      continue;
    }
    ojson names = ojson::array();
    for (int v : *found) names.push_back(joint.names()[v]);
    cop[joint.names()[d]] = names;
  }
  write(dir / "figure3_coparents.json", cop);

  auto corpus = condition2_corpus(1);
  write(dir / "condition2_model.json", to_json(corpus.front().model));
  write(dir / "condition2_joint.json", to_json(exact_joint(corpus.front().model, true)));

  write(dir / "nonneg_low_rank.json", low_rank_matrices(0));

  ExperimentConfig cfg;
  cfg.samples = 1500;
  cfg.sae.training_steps = 600;
  cfg.ablation.samples = 1500;
  cfg.ablation.training_steps = 400;
  cfg.ablation.eval_rows = 200;
  cfg.eval_rows = 200;
  write(dir / "experiment_small.json", to_json(cfg));
  return 0;
}
