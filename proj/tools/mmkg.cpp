// mmkg: command-line entry point for the knowledge-graph QA pipeline.
// Every subcommand prints machine-readable JSON on stdout and logs on stderr.
// Exit codes: 0 success, 1 validation error, 2 I/O or transport error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mmkg/config.hpp"
#include "mmkg/consistency.hpp"
#include "mmkg/diversity.hpp"
#include "mmkg/embedding.hpp"
#include "mmkg/errors.hpp"
#include "mmkg/ingestion.hpp"
#include "mmkg/kg.hpp"
#include "mmkg/pipeline.hpp"
#include "mmkg/qa.hpp"
#include "mmkg/refine.hpp"
#include "mmkg/remote.hpp"
#include "mmkg/router.hpp"
#include "mmkg/standardize.hpp"
#include "mmkg/textmetrics.hpp"

namespace {

using nlohmann::json;

json stats_json(const mmkg::GraphStats& s) {
    return {{"recipes", s.recipes},
            {"ingredients", s.ingredients},
            {"relations", s.relations},
            {"ingredient_images", s.ingredient_images},
            {"recipe_images", s.recipe_images}};
}

struct Endpoint {
    std::string host;
    int port = 0;
};

// "host:port" or "http://host:port"
Endpoint parse_endpoint(std::string s) {
    if (s.rfind("http://", 0) == 0) s = s.substr(7);
    auto colon = s.rfind(':');
    if (colon == std::string::npos)
        throw mmkg::ValidationError("endpoint must be host:port, got: " + s);
    Endpoint e;
    e.host = s.substr(0, colon);
    try {
        e.port = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw mmkg::ValidationError("bad endpoint port in: " + s);
    }
    return e;
}

std::vector<std::string> read_jsonl(const std::filesystem::path& path, std::vector<json>& out) {
    std::ifstream in(path);
    if (!in) throw mmkg::IoError("cannot read file: " + path.string());
    std::string line;
    int lineno = 0;
    std::vector<std::string> raw;
    while (std::getline(in, line)) {
        ++lineno;
        if (mmkg::trim(line).empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw mmkg::ParseError(std::string("bad JSON line: ") + e.what(), lineno);
        }
        raw.push_back(line);
    }
    return raw;
}

int run(int argc, char** argv) {
    CLI::App app{"Multimodal food knowledge-graph QA pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    unsigned jobs_flag = 0;
    app.add_option("--config", config_path, "Config file (overrides MMKG_CONFIG)");
    app.add_option("--jobs", jobs_flag, "Worker parallelism cap");

    auto load_cfg = [&]() {
        mmkg::Config cfg =
            config_path.empty() ? mmkg::Config::from_env() : mmkg::Config::load(config_path);
        if (jobs_flag > 0) cfg.jobs = jobs_flag;
        return cfg;
    };

    std::string data_dir = "data";
    if (const char* env = std::getenv("MMKG_DATA_DIR"); env != nullptr && *env != '\0')
        data_dir = env;
    app.add_option("--data-dir", data_dir,
                   "Directory with standardizer lexicons and substitutions (default: data, or "
                   "MMKG_DATA_DIR)");

    // ---- build-kg ----
    auto* build = app.add_subcommand("build-kg", "Construct the knowledge graph from CSV inputs");
    std::string recipes_f, nutrition_f, images_f, out_f, rejects_f;
    build->add_option("--recipes", recipes_f, "Recipes CSV")->required();
    build->add_option("--nutrition", nutrition_f, "Nutrition CSV")->required();
    build->add_option("--images", images_f, "Image manifest (entity<TAB>path)")->required();
    build->add_option("--out", out_f, "Write the graph to this file");
    build->add_option("--rejects", rejects_f, "Write rejected rows as JSON Lines");
    build->callback([&]() {
        auto standardizer =
            mmkg::Standardizer::load_dir(std::filesystem::path(data_dir) / "standardizer");
        mmkg::BuildReport report;
        auto kg = mmkg::build_graph(recipes_f, nutrition_f, images_f, standardizer, &report);
        if (!out_f.empty()) kg.save(out_f);
        if (!rejects_f.empty())
            mmkg::write_file(rejects_f, mmkg::rejects_to_jsonl(report.recipe_rejects));
        json j;
        j["stats"] = stats_json(report.stats);
        j["rejected_rows"] = report.recipe_rejects.size();
        j["nutrition_attached"] = report.nutrition.attached;
        j["nutrition_unmatched"] = report.nutrition.unmatched;
        j["images_linked"] = report.images.linked;
        j["images_missing_files"] = report.images.missing_files;
        if (!out_f.empty()) j["graph"] = out_f;
        std::cout << j.dump(2) << "\n";
    });

    // ---- stats ----
    auto* stats_cmd = app.add_subcommand("stats", "Summary statistics of a saved graph");
    std::string kg_f;
    stats_cmd->add_option("--kg", kg_f, "Graph file")->required();
    stats_cmd->callback([&]() {
        auto kg = mmkg::KnowledgeGraph::load(kg_f);
        std::cout << stats_json(kg.stats()).dump(2) << "\n";
    });

    // ---- gen-qa ----
    auto* gen = app.add_subcommand("gen-qa", "Generate the template QA corpus");
    std::string templates_f, augmented_f, corpus_out;
    std::int64_t limit = -1;
    gen->add_option("--kg", kg_f, "Graph file")->required();
    gen->add_option("--templates", templates_f, "Template file")->required();
    gen->add_option("--augmented", augmented_f, "Augmented QA JSON Lines to merge");
    gen->add_option("--out", corpus_out, "Corpus output (JSON Lines)")->required();
    gen->add_option("--limit", limit, "Per-template binding limit (0 = empty corpus)");
    gen->callback([&]() {
        auto kg = mmkg::KnowledgeGraph::load(kg_f);
        kg.freeze();
        auto templates = mmkg::load_templates(templates_f);
        auto subs =
            mmkg::SubstitutionTable::load(std::filesystem::path(data_dir) / "substitutions.tsv");
        mmkg::QaOptions opts;
        opts.substitutions = &subs;
        if (limit >= 0) opts.per_template_limit = static_cast<size_t>(limit);
        auto corpus = mmkg::generate_corpus(kg, templates, opts);
        size_t template_pairs = corpus.size();
        size_t augmented_pairs = 0, flagged = 0;
        if (!augmented_f.empty()) {
            auto ingest = mmkg::ingest_augmented(augmented_f, kg);
            augmented_pairs = ingest.pairs.size();
            flagged = ingest.issues.size();
            for (const auto& issue : ingest.issues)
                std::cerr << "augmented line " << issue.line << ": " << issue.issue << "\n";
            corpus.insert(corpus.end(), ingest.pairs.begin(), ingest.pairs.end());
        }
        mmkg::save_corpus(corpus, corpus_out);
        json j{{"pairs", corpus.size()},
               {"template_pairs", template_pairs},
               {"augmented_pairs", augmented_pairs},
               {"augmented_issues", flagged},
               {"out", corpus_out}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- refine ----
    auto* refine_cmd = app.add_subcommand("refine", "Deduplicate, balance, and curate a corpus");
    std::string in_f, blocklist_f, removal_f;
    double dedupe_threshold = -1.0;
    int balance_k = 0;
    std::int64_t balance_cap = 0;
    refine_cmd->add_option("--in", in_f, "Corpus input (JSON Lines)")->required();
    refine_cmd->add_option("--out", out_f, "Corpus output")->required();
    refine_cmd->add_option("--blocklist", blocklist_f, "Curation blocklist");
    refine_cmd->add_option("--removals", removal_f, "Removal log output (JSON Lines)");
    refine_cmd->add_option("--dedupe-threshold", dedupe_threshold,
                           "Semantic dedup cosine threshold (config default otherwise)");
    refine_cmd->add_option("--balance-k", balance_k, "Cluster count for balancing (0 = skip)");
    refine_cmd->add_option("--balance-cap", balance_cap, "Per-cluster retention cap");
    refine_cmd->callback([&]() {
        auto cfg = load_cfg();
        if (dedupe_threshold < 0.0) dedupe_threshold = cfg.dedupe_threshold;
        auto corpus = mmkg::load_corpus(in_f);
        size_t input = corpus.size();
        mmkg::ReferenceEmbedder embedder;
        corpus = mmkg::dedupe_exact(corpus);
        size_t after_exact = corpus.size();
        corpus = mmkg::dedupe_semantic(corpus, embedder, dedupe_threshold, cfg.jobs);
        size_t after_semantic = corpus.size();
        if (balance_k > 0 && balance_cap > 0)
            corpus = mmkg::balance(corpus, embedder, balance_k,
                                   static_cast<size_t>(balance_cap), cfg.seed, cfg.jobs);
        size_t after_balance = corpus.size();
        std::vector<mmkg::CurationRemoval> removals;
        if (!blocklist_f.empty())
            corpus = mmkg::apply_curation(corpus, mmkg::load_blocklist(blocklist_f), &removals);
        if (!removal_f.empty()) {
            std::string log;
            for (const auto& r : removals)
                log += json{{"id", r.pair_id}, {"matched", r.matched_entry}}.dump() + "\n";
            mmkg::write_file(removal_f, log);
        }
        mmkg::save_corpus(corpus, out_f);
        json j{{"input", input},
               {"after_exact_dedupe", after_exact},
               {"after_semantic_dedupe", after_semantic},
               {"after_balance", after_balance},
               {"after_curation", corpus.size()},
               {"removed_by_curation", removals.size()},
               {"out", out_f}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- diversity ----
    auto* div = app.add_subcommand("diversity", "Clustering diversity indices of a corpus");
    int div_k = -1;
    std::int64_t div_seed = -1;
    div->add_option("--in", in_f, "Corpus input (JSON Lines)")->required();
    div->add_option("--k", div_k, "Cluster count (default from config, 50)");
    div->add_option("--seed", div_seed, "K-Means seed (default from config)");
    div->callback([&]() {
        auto cfg = load_cfg();
        int k = div_k > 0 ? div_k : cfg.diversity_k;
        std::uint64_t seed = div_seed >= 0 ? static_cast<std::uint64_t>(div_seed) : cfg.seed;
        auto corpus = mmkg::load_corpus(in_f);
        std::vector<std::string> questions;
        for (const auto& p : corpus) questions.push_back(p.question);
        mmkg::ReferenceEmbedder embedder;
        auto report = mmkg::diversity_report(questions, embedder, k, seed, cfg.jobs);
        json j{{"silhouette", report.silhouette},
               {"davies_bouldin", report.davies_bouldin},
               {"dunn", report.dunn},
               {"k", report.k},
               {"n", report.n},
               {"seed", seed}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- mismatch ----
    auto* mis = app.add_subcommand("mismatch", "Image-text mismatch rate over pairs");
    std::string pairs_f, report_f;
    double threshold = -1.0;
    mis->add_option("--pairs", pairs_f, "JSON Lines of {id, text, image}")->required();
    mis->add_option("--threshold", threshold, "Cosine threshold (config default otherwise)");
    mis->add_option("--report", report_f, "Per-pair report output (JSON Lines)");
    mis->callback([&]() {
        auto cfg = load_cfg();
        if (threshold < 0.0) threshold = cfg.mismatch_threshold;
        std::vector<json> lines;
        read_jsonl(pairs_f, lines);
        std::vector<mmkg::TextImagePair> pairs;
        for (const auto& j : lines)
            pairs.push_back({j.value("id", std::to_string(pairs.size())),
                             j.at("text").get<std::string>(), j.at("image").get<std::string>()});
        mmkg::ReferenceEmbedder embedder;
        std::vector<mmkg::ConsistencyReport> reports;
        auto summary = mmkg::mismatch_rate(pairs, embedder, threshold,
                                           report_f.empty() ? nullptr : &reports, cfg.jobs);
        if (!report_f.empty()) {
            std::string out;
            for (const auto& r : reports) out += mmkg::consistency_report_to_json(r).dump() + "\n";
            mmkg::write_file(report_f, out);
        }
        json j{{"total_samples", summary.total},
               {"detected_mismatches", summary.mismatches},
               {"mismatch_rate", summary.rate},
               {"threshold", threshold}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- hallucinate ----
    auto* hal = app.add_subcommand("hallucinate", "QA-consistency hallucination detection");
    std::string dataset_f, vqa_spec;
    double match_thr = -1.0, halluc_thr = -1.0;
    hal->add_option("--dataset", dataset_f, "JSON Lines of {pair_id, gt_image, gen_image}")
        ->required();
    hal->add_option("--vqa", vqa_spec, "Vision-QA client: mock:<fixture.json> or host:port")
        ->required();
    hal->add_option("--match-threshold", match_thr, "Token-F1 at or above: match");
    hal->add_option("--halluc-threshold", halluc_thr, "Token-F1 below: hallucination");
    hal->add_option("--report", report_f, "Per-case report output (JSON Lines)");
    hal->callback([&]() {
        auto cfg = load_cfg();
        std::vector<json> lines;
        read_jsonl(dataset_f, lines);
        std::vector<mmkg::HallucinationCase> dataset;
        for (const auto& j : lines)
            dataset.push_back({j.at("pair_id").get<std::string>(),
                               j.at("gt_image").get<std::string>(),
                               j.at("gen_image").get<std::string>()});
        std::unique_ptr<mmkg::VisionQAClient> client;
        if (vqa_spec.rfind("mock:", 0) == 0) {
            client = std::make_unique<mmkg::MockVisionQA>(
                mmkg::MockVisionQA::load(vqa_spec.substr(5)));
        } else {
            auto ep = parse_endpoint(vqa_spec);
            client = std::make_unique<mmkg::RemoteVisionQA>(ep.host, ep.port);
        }
        mmkg::ReferenceEmbedder embedder;
        mmkg::MetricsCfg mcfg;
        mcfg.embedder = &embedder;
        mcfg.thresholds.match_threshold = match_thr >= 0.0 ? match_thr : cfg.match_threshold;
        mcfg.thresholds.halluc_threshold = halluc_thr >= 0.0 ? halluc_thr : cfg.halluc_threshold;
        std::vector<mmkg::ConsistencyReport> reports;
        auto summary = mmkg::hallucination_rate(dataset, *client, mcfg, &reports);
        if (!report_f.empty()) {
            std::string out;
            for (const auto& r : reports) out += mmkg::consistency_report_to_json(r).dump() + "\n";
            mmkg::write_file(report_f, out);
        }
        json j{{"total", summary.total},
               {"hallucinations", summary.hallucinations},
               {"hallucination_rate", summary.rate},
               {"mean_scores",
                {{"token_f1", summary.mean_scores.token_f1},
                 {"rouge_l_f1", summary.mean_scores.rouge_l_f1},
                 {"bleu1", summary.mean_scores.bleu1}}}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- route ----
    auto* route_cmd = app.add_subcommand("route", "Retrieval/generation/hybrid strategy report");
    std::string queries_f, gen_spec = "mock", gen_dir = "generated", decisions_f;
    double tau = -1.0;
    std::string image_base;
    route_cmd->add_option("--queries", queries_f, "JSON Lines of {id, question, answer}")
        ->required();
    route_cmd->add_option("--kg", kg_f, "Graph file")->required();
    route_cmd->add_option("--tau", tau, "Retrieval confidence threshold (config default)");
    route_cmd->add_option("--gen", gen_spec, "Generation client: mock or host:port");
    route_cmd->add_option("--gen-dir", gen_dir, "Output directory for mock-generated images");
    route_cmd->add_option("--image-base", image_base,
                          "Base directory for KG image paths (default: graph file's directory)");
    route_cmd->add_option("--decisions", decisions_f, "Hybrid per-query decisions (JSON Lines)");
    route_cmd->callback([&]() {
        auto cfg = load_cfg();
        if (tau < 0.0) tau = cfg.tau;
        auto kg = mmkg::KnowledgeGraph::load(kg_f);
        kg.freeze();
        std::vector<json> lines;
        read_jsonl(queries_f, lines);
        std::vector<mmkg::RouteQuery> queries;
        for (const auto& j : lines)
            queries.push_back({j.value("id", std::to_string(queries.size())),
                               j.at("question").get<std::string>(),
                               j.at("answer").get<std::string>()});
        mmkg::ReferenceEmbedder embedder;
        mmkg::RouterCfg rcfg;
        rcfg.image_base = image_base.empty()
                              ? std::filesystem::path(kg_f).parent_path()
                              : std::filesystem::path(image_base);
        std::unique_ptr<mmkg::GenerationClient> gen_client;
        if (gen_spec == "mock") {
            gen_client =
                std::make_unique<mmkg::MockGenerationClient>(gen_dir, cfg.mock_generation_latency);
            rcfg.synthetic_retrieval_latency = cfg.mock_retrieval_latency;
        } else {
            auto ep = parse_endpoint(gen_spec);
            gen_client = std::make_unique<mmkg::RemoteGenerationClient>(ep.host, ep.port);
        }
        auto index = mmkg::build_index(kg, embedder, rcfg.image_base);
        std::vector<mmkg::RoutingDecision> decisions;
        auto rows = mmkg::strategy_report(queries, index, *gen_client, embedder, tau, rcfg,
                                          nullptr, decisions_f.empty() ? nullptr : &decisions);
        if (!decisions_f.empty()) {
            std::string out;
            for (size_t i = 0; i < decisions.size(); ++i) {
                const auto& d = decisions[i];
                json dj{{"id", queries[i].id},
                        {"strategy", std::string(mmkg::strategy_name(d.strategy))},
                        {"image_ref", d.image_ref},
                        {"similarity", d.similarity},
                        {"best_retrieval_similarity", d.best_retrieval_similarity},
                        {"latency", d.latency}};
                out += dj.dump() + "\n";
            }
            mmkg::write_file(decisions_f, out);
        }
        json strategies = json::array();
        for (const auto& r : rows) {
            json row{{"strategy", r.strategy},
                     {"cosine_similarity", r.mean_similarity},
                     {"latency", r.mean_latency},
                     {"retrieved", r.retrieved},
                     {"generated", r.generated}};
            if (r.hallucination_rate) row["hallucination_rate"] = *r.hallucination_rate;
            strategies.push_back(row);
        }
        json j{{"tau", tau}, {"queries", queries.size()}, {"strategies", strategies}};
        std::cout << j.dump(2) << "\n";
        std::cerr << mmkg::strategy_table(rows);
    });

    // ---- answer ----
    auto* ans = app.add_subcommand("answer", "Answer one question with text + image");
    std::string question;
    ans->add_option("--question", question, "Question text")->required();
    ans->add_option("--kg", kg_f, "Graph file")->required();
    ans->add_option("--templates", templates_f, "Template file (for the KG-mock text client)");
    ans->add_option("--tau", tau, "Retrieval confidence threshold");
    ans->add_option("--gen-dir", gen_dir, "Output directory for mock-generated images");
    ans->callback([&]() {
        auto cfg = load_cfg();
        double use_tau = tau > 0.0 ? tau : cfg.tau;
        auto kg = mmkg::KnowledgeGraph::load(kg_f);
        kg.freeze();
        std::string tpath = templates_f.empty()
                                ? (std::filesystem::path(data_dir) / "templates" /
                                   "default_templates.txt")
                                      .string()
                                : templates_f;
        auto templates = mmkg::load_templates(tpath);
        mmkg::ReferenceEmbedder embedder;
        mmkg::KgTemplateTextClient text_client(kg, templates);
        mmkg::MockGenerationClient gen_client(gen_dir, cfg.mock_generation_latency);
        mmkg::RouterCfg rcfg;
        rcfg.synthetic_retrieval_latency = cfg.mock_retrieval_latency;
        rcfg.image_base = std::filesystem::path(kg_f).parent_path();
        auto index = mmkg::build_index(kg, embedder, rcfg.image_base);
        mmkg::PipelineClients clients;
        clients.text = &text_client;
        clients.generation = &gen_client;
        clients.embedder = &embedder;
        clients.index = &index;
        mmkg::PipelineCfg pcfg;
        pcfg.tau = use_tau;
        pcfg.router = rcfg;
        auto result = mmkg::answer_question(question, kg, clients, pcfg);
        json j{{"question", result.question},
               {"text_answer", result.text_answer},
               {"image_ref", result.image_ref},
               {"routing",
                {{"strategy", std::string(mmkg::strategy_name(result.routing.strategy))},
                 {"similarity", result.routing.similarity},
                 {"best_retrieval_similarity", result.routing.best_retrieval_similarity},
                 {"latency", result.routing.latency}}},
               {"provenance", result.provenance}};
        std::cout << j.dump(2) << "\n";
    });

    // ---- eval-metrics ----
    auto* eval = app.add_subcommand("eval-metrics", "BLEU/ROUGE/token-F1 over candidate pairs");
    eval->add_option("--pairs", pairs_f, "JSON Lines of {candidate, reference}")->required();
    eval->callback([&]() {
        std::vector<json> lines;
        read_jsonl(pairs_f, lines);
        if (lines.empty()) throw mmkg::ValidationError("eval-metrics: no pairs");
        mmkg::ReferenceEmbedder embedder;
        json per_pair = json::array();
        double sums[8] = {0};
        for (const auto& jline : lines) {
            auto cand = mmkg::tokenize(jline.at("candidate").get<std::string>());
            auto ref = mmkg::tokenize(jline.at("reference").get<std::string>());
            double b1 = mmkg::bleu(cand, ref, 1), b2 = mmkg::bleu(cand, ref, 2),
                   b3 = mmkg::bleu(cand, ref, 3), b4 = mmkg::bleu(cand, ref, 4);
            auto r1 = mmkg::rouge_n(cand, ref, 1), r2 = mmkg::rouge_n(cand, ref, 2),
                 rl = mmkg::rouge_l(cand, ref);
            auto tf = cand.empty() || ref.empty() ? mmkg::PrecisionRecallF1{}
                                                  : mmkg::token_f1(cand, ref, embedder);
            double vals[8] = {b1, b2, b3, b4, r1.f1, r2.f1, rl.f1, tf.f1};
            for (int i = 0; i < 8; ++i) sums[i] += vals[i];
            per_pair.push_back({{"bleu1", b1},
                                {"bleu2", b2},
                                {"bleu3", b3},
                                {"bleu4", b4},
                                {"rouge1_f1", r1.f1},
                                {"rouge2_f1", r2.f1},
                                {"rouge_l_f1", rl.f1},
                                {"token_f1", tf.f1}});
        }
        const char* names[8] = {"bleu1", "bleu2",     "bleu3",      "bleu4",
                                "rouge1_f1", "rouge2_f1", "rouge_l_f1", "token_f1"};
        json means;
        for (int i = 0; i < 8; ++i) means[names[i]] = sums[i] / static_cast<double>(lines.size());
        json j{{"pairs", lines.size()}, {"mean", means}, {"per_pair", per_pair}};
        std::cout << j.dump(2) << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << "\n";
        return 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const mmkg::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const mmkg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
