#include "dhcn/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "dhcn/common.hpp"
#include "dhcn/data.hpp"
#include "dhcn/evaluation.hpp"
#include "dhcn/hypergraph.hpp"
#include "dhcn/rng.hpp"
#include "dhcn/selfcheck.hpp"
#include "dhcn/sparse.hpp"
#include "dhcn/training.hpp"

namespace dhcn {

namespace {

/// `row col value` per entry, row-major, full precision.
void write_coordinate_file(const std::string& path, const SparseMatrix& matrix) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write graph dump: " + path);
  for (std::size_t r = 0; r < matrix.rows; ++r) {
    for (std::size_t k = matrix.row_ptr[r]; k < matrix.row_ptr[r + 1]; ++k) {
      char line[80];
      std::snprintf(line, sizeof(line), "%zu %zu %.17g\n", r, matrix.col_idx[k],
                    matrix.vals[k]);
      out << line;
    }
  }
  if (!out) throw IoError("failed writing graph dump: " + path);
}

}  // namespace

void cmd_preprocess(const PreprocessArgs& args, std::ostream& out, std::ostream& err) {
  err << "reading sessions from " << args.input << "\n";
  PipelineStats stats;
  ProcessedDataset dataset =
      build_dataset(args.input, args.test_fraction, args.min_item_freq, args.min_session_len,
                    args.max_session_len, &stats);
  dataset.save(args.output);

  out << "sessions_loaded=" << stats.sessions_loaded << " train_split=" << stats.train_split
      << " test_split=" << stats.test_split << "\n";
  out << "items_kept=" << dataset.vocab.size() << " items_dropped=" << stats.filter.items_removed
      << " sessions_dropped=" << stats.filter.sessions_dropped << "\n";
  out << "train_sequences=" << dataset.train_sequences.size()
      << " test_sequences=" << dataset.test_sequences.size() << "\n";
  out << "wrote " << args.output << "\n";
}

void cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  ProcessedDataset dataset = ProcessedDataset::load(args.dataset_path);
  err << "dataset: " << dataset.vocab.size() << " items, " << dataset.train_sequences.size()
      << " train sequences, " << dataset.test_sequences.size() << " test sequences\n";

  ModelConfig model_config = args.model;
  model_config.max_len = dataset.max_session_len;

  if (!args.dump_graphs_dir.empty()) {
    std::filesystem::create_directories(args.dump_graphs_dir);
    Hypergraph hg = build_incidence(dataset.train_sessions, dataset.vocab.size());
    PropagationOperator op = propagation_operator(hg);
    write_coordinate_file(args.dump_graphs_dir + "/propagation.txt", op.matrix);
    std::vector<Batch> batches =
        make_batches(dataset.train_sequences, args.train.batch_size, /*shuffle=*/false, 0);
    LineGraph lg = build_line_graph(batches.front().unique_items_per_row);
    write_coordinate_file(args.dump_graphs_dir + "/line_adjacency.txt", lg.adjacency);
    err << "wrote graph dumps to " << args.dump_graphs_dir << "\n";
  }

  Rng rng(args.train.seed);
  ModelParams params = ModelParams::init(dataset.vocab.size(), model_config, rng);

  std::ofstream csv(args.log_path);
  if (!csv) throw IoError("cannot write training log: " + args.log_path);
  TrainResult result = train(params, model_config, args.train, dataset, &csv);
  params.save(args.checkpoint_path, model_config);

  const EpochRecord& last = result.log.back();
  char summary[128];
  std::snprintf(summary, sizeof(summary), "epochs=%zu final_Lr=%.6f final_Ls=%.6f\n",
                result.log.size(), last.mean_rec_loss, last.mean_ssl_loss);
  out << summary;
  if (last.metrics) out << last.metrics->to_table();
  if (result.stopped_early) out << "stopped early (no P@20 improvement)\n";
  if (result.ssl_skipped_batches > 0)
    err << "contrastive term skipped on " << result.ssl_skipped_batches
        << " single-sequence batches\n";
  out << "wrote checkpoint " << args.checkpoint_path << "\n";
  out << "wrote log " << args.log_path << "\n";
}

void cmd_evaluate(const EvaluateArgs& args, std::ostream& out, std::ostream& err) {
  auto [params, model_config] = ModelParams::load(args.checkpoint_path);
  ProcessedDataset dataset = ProcessedDataset::load(args.dataset_path);
  if (params.num_items() != dataset.vocab.size())
    throw DataError("checkpoint " + args.checkpoint_path + " was trained on " +
                    std::to_string(params.num_items()) + " items but " + args.dataset_path +
                    " has a vocabulary of " + std::to_string(dataset.vocab.size()));
  err << "scoring " << dataset.test_sequences.size() << " test sequences\n";

  Hypergraph hg = build_incidence(dataset.train_sessions, dataset.vocab.size());
  PropagationOperator op = propagation_operator(hg);
  Tape scratch(false);
  Tensor x_h = item_representations(scratch, params, model_config, op);

  MetricsReport report =
      evaluate(params, model_config, x_h, dataset.test_sequences, args.ks);
  out << "model (" << report.sequence_count << " sequences)\n";
  out << report.to_table();
  out << report.to_csv();

  if (args.with_popularity_baseline) {
    MetricsReport baseline = popularity_baseline(dataset.train_sequences,
                                                 dataset.test_sequences,
                                                 dataset.vocab.size(), args.ks);
    out << "popularity baseline\n";
    out << baseline.to_table();
    out << baseline.to_csv();
  }
}

bool cmd_selfcheck(std::ostream& out) {
  std::vector<CheckResult> results = run_selfchecks();
  out << format_check_results(results);
  return all_passed(results);
}

}  // namespace dhcn
