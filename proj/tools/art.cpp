#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "art/attention.hpp"
#include "art/decoder.hpp"
#include "art/errors.hpp"
#include "art/image_io.hpp"
#include "art/latent.hpp"
#include "art/layout.hpp"
#include "art/metrics.hpp"
#include "art/planner.hpp"
#include "art/rope.hpp"
#include "art/transparency.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitNumeric = 3;

std::pair<int, int> parse_size(const std::string& text) {
    const auto sep = text.find('x');
    if (sep == std::string::npos) {
        throw art::ValidationError("expected WxH, got: " + text);
    }
    return {std::stoi(text.substr(0, sep)), std::stoi(text.substr(sep + 1))};
}

std::pair<int, int> parse_range(const std::string& text) {
    const auto sep = text.find("..");
    if (sep == std::string::npos) return {std::stoi(text), std::stoi(text)};
    return {std::stoi(text.substr(0, sep)), std::stoi(text.substr(sep + 2))};
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw art::IoError("cannot open: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw art::IoError("cannot open for writing: " + path);
    out << text;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("ART_SEED")) {
        return std::strtoull(env, nullptr, 10);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-layer transparent image toolkit: layouts, transparency codec, "
                 "token packing, rotary embeddings, attention cost models, toy decoder "
                 "training, and metrics"};
    app.require_subcommand(1);

    // ---- layout validate | ids ----
    auto* layout_cmd = app.add_subcommand("layout", "Layout tooling");
    layout_cmd->require_subcommand(1);
    std::string layout_file, canvas_str = "1024x1024", out_file;

    auto* lv = layout_cmd->add_subcommand("validate", "Validate a layout JSON file");
    lv->add_option("layout", layout_file, "Layout JSON file")->required();
    lv->add_option("--canvas", canvas_str, "Canvas size WxH");

    auto* lids = layout_cmd->add_subcommand("ids", "Dump 3D position ids as CSV");
    lids->add_option("layout", layout_file, "Layout JSON file")->required();
    lids->add_option("--canvas", canvas_str, "Canvas size WxH");
    lids->add_option("-o,--output", out_file, "Output CSV (stdout when omitted)");

    // ---- plan ----
    auto* plan_cmd = app.add_subcommand("plan", "Produce an anonymous region layout");
    int elements = -1;
    std::uint64_t seed = default_seed();
    std::string template_name = "poster";
    plan_cmd->add_option("--canvas", canvas_str, "Canvas size WxH");
    plan_cmd->add_option("--elements", elements, "Foreground element count (sampled when omitted)");
    plan_cmd->add_option("--seed", seed, "Planner seed");
    plan_cmd->add_option("--template", template_name, "poster|banner|scatter|grid");
    plan_cmd->add_option("-o,--output", out_file, "Output JSON (stdout when omitted)");

    // ---- composite ----
    auto* comp_cmd = app.add_subcommand("composite", "Composite layers over a background");
    std::string bg_file, out_png;
    std::vector<std::string> layer_files;
    comp_cmd->add_option("--background", bg_file, "Background RGB PNG")->required();
    comp_cmd->add_option("--layout", layout_file, "Layout JSON with one region per layer");
    comp_cmd->add_option("--layer", layer_files, "RGBA layer PNGs, ascending layer order");
    comp_cmd->add_option("-o,--output", out_png, "Output PNG")->required();

    // ---- transparency encode | decode ----
    auto* transp_cmd = app.add_subcommand("transparency", "Transparency codec");
    transp_cmd->require_subcommand(1);
    std::string in_png, alpha_png;
    auto* te = transp_cmd->add_subcommand("encode", "RGBA PNG to gray-backed RGB PNG");
    te->add_option("input", in_png, "RGBA PNG")->required();
    te->add_option("-o,--output", out_png, "Output RGB PNG")->required();
    auto* td = transp_cmd->add_subcommand("decode", "Gray-backed RGB + alpha to RGBA PNG");
    td->add_option("input", in_png, "Gray-backed RGB PNG")->required();
    td->add_option("--alpha", alpha_png, "RGBA PNG supplying the alpha channel")->required();
    td->add_option("-o,--output", out_png, "Output RGBA PNG")->required();

    // ---- rope dump ----
    auto* rope_cmd = app.add_subcommand("rope", "Rotary embedding tooling");
    rope_cmd->require_subcommand(1);
    auto* rd = rope_cmd->add_subcommand("dump", "Dump cos/sin tables for a layout as CSV");
    std::string axes_str = "16,56,56";
    double theta = 10000.0;
    rd->add_option("layout", layout_file, "Layout JSON file")->required();
    rd->add_option("--canvas", canvas_str, "Canvas size WxH");
    rd->add_option("--axes", axes_str, "Per-axis dims d_layer,d_y,d_x");
    rd->add_option("--theta", theta, "Frequency base");
    rd->add_option("-o,--output", out_file, "Output CSV (stdout when omitted)");

    // ---- cost sweep ----
    auto* cost_cmd = app.add_subcommand("cost", "Attention cost simulator");
    cost_cmd->require_subcommand(1);
    auto* cs = cost_cmd->add_subcommand("sweep", "Cost table over a layer-count range");
    std::string scheme_str = "regional", k_str = "10..50", region_str = "64x64";
    int context_tokens = 0, heads = 4;
    cs->add_option("--scheme", scheme_str, "regional|full|spatial-temporal");
    cs->add_option("--k", k_str, "Layer count range MIN..MAX");
    cs->add_option("--region", region_str, "Region size WxH");
    cs->add_option("--canvas", canvas_str, "Canvas size WxH");
    cs->add_option("--context", context_tokens, "Context (text) token count");
    cs->add_option("--heads", heads, "Attention heads for the memory estimate");
    cs->add_option("-o,--output", out_file, "Output CSV (stdout when omitted)");

    // ---- train toy ----
    auto* train_cmd = app.add_subcommand("train", "Toy decoder training");
    train_cmd->require_subcommand(1);
    auto* tt = train_cmd->add_subcommand("toy", "Overfit the toy decoder on synthetic data");
    int steps = 200, k_layers = 2, n_samples = 4;
    double lr = 0.003;
    std::string trace_file, ckpt_file;
    tt->add_option("--canvas", canvas_str, "Canvas size WxH");
    tt->add_option("--samples", n_samples, "Synthetic sample count");
    tt->add_option("--layers", k_layers, "Foreground layers per sample");
    tt->add_option("--steps", steps, "Gradient steps");
    tt->add_option("--lr", lr, "Learning rate");
    tt->add_option("--seed", seed, "Data/init seed");
    tt->add_option("--trace", trace_file, "Loss trace CSV output");
    tt->add_option("--checkpoint", ckpt_file, "Checkpoint output path");

    // ---- metrics compare ----
    auto* metrics_cmd = app.add_subcommand("metrics", "Reconstruction metrics");
    metrics_cmd->require_subcommand(1);
    auto* mc = metrics_cmd->add_subcommand("compare", "PSNR/SSIM between two PNGs");
    std::string png_a, png_b;
    mc->add_option("a", png_a, "First PNG")->required();
    mc->add_option("b", png_b, "Second PNG")->required();
    mc->add_option("-o,--output", out_file, "Output JSON (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    const auto emit = [&](const std::string& text) {
        if (out_file.empty()) {
            std::cout << text;
        } else {
            write_file(out_file, text);
        }
    };

    try {
        const auto [cw, ch] = parse_size(canvas_str);

        if (lv->parsed()) {
            const auto layout = art::parse_layout(read_file(layout_file), cw, ch);
            const auto violations = art::validate_layout(layout);
            for (const std::string& v : violations) std::cout << v << '\n';
            if (!violations.empty()) return kExitValidation;
            std::cout << "ok: " << layout.regions.size() << " regions\n";
        } else if (lids->parsed()) {
            const auto layout = art::parse_layout(read_file(layout_file), cw, ch);
            const auto ids =
                art::prepare_latent_image_ids(art::sequence_layout(layout, {}), {});
            std::ostringstream csv;
            csv << "layer,row,col\n";
            for (const art::TokenId& id : ids) {
                csv << id.layer << ',' << id.row << ',' << id.col << '\n';
            }
            emit(csv.str());
        } else if (tt->parsed()) {
            std::vector<art::MultiLayerImage> samples;
            for (int i = 0; i < n_samples; ++i) {
                samples.push_back(art::synth_multilayer(seed + i, k_layers, cw, ch));
            }
            art::PipelineConfig pipe;
            pipe.patch_size = 1;  // unpatched path: in_channels 16, 8 px tokens
            art::DecoderConfig cfg;
            cfg.pixels_per_token = pipe.token_px();
            art::Parameters trained;
            const auto trace =
                art::train_overfit(samples, pipe, cfg, steps, lr, seed, &trained);
            std::ostringstream csv;
            csv << "step,l1,wall_ms\n";
            for (const art::TrainRecord& r : trace) {
                csv << r.step << ',' << r.l1 << ',' << r.wall_ms << '\n';
            }
            if (!trace_file.empty()) {
                write_file(trace_file, csv.str());
            } else {
                std::cout << csv.str();
            }
            if (!ckpt_file.empty()) art::save_checkpoint(ckpt_file, trained);
            if (!trace.empty() && trace.size() < static_cast<std::size_t>(steps)) {
                std::cerr << "training aborted at step " << trace.back().step
                          << " (non-finite loss)\n";
                return kExitNumeric;
            }
        } else if (plan_cmd->parsed()) {
            art::PlannerRequest req;
            req.canvas_width = cw;
            req.canvas_height = ch;
            if (elements >= 0) req.element_count = elements;
            req.seed = seed;
            req.tmpl = art::planner_template_from_name(template_name);
            emit(art::serialize_layout(art::plan(req).layout) + "\n");
        } else if (comp_cmd->parsed()) {
            const art::Raster bg = art::read_png(bg_file);
            std::vector<art::PlacedLayer> layers;
            if (!layer_files.empty()) {
                if (layout_file.empty()) {
                    throw art::ValidationError("composite: --layout required with --layer");
                }
                const auto layout = art::parse_layout(read_file(layout_file),
                                                      bg.width(), bg.height());
                std::size_t li = 0;
                for (const art::Region& r : layout.regions) {
                    if (r.layer_index == 0) continue;
                    if (li >= layer_files.size()) break;
                    layers.push_back(art::PlacedLayer{art::read_png(layer_files[li]), r});
                    ++li;
                }
                if (li != layer_files.size()) {
                    throw art::ValidationError("composite: layer/region count mismatch");
                }
            }
            art::write_png(out_png, art::composite(bg, layers));
        } else if (te->parsed()) {
            art::write_png(out_png, art::encode_transparency(art::read_png(in_png)));
        } else if (td->parsed()) {
            const art::Raster gray = art::read_png(in_png);
            const art::Raster rgba = art::read_png(alpha_png);
            if (rgba.channels() != 4) {
                throw art::ValidationError("decode: --alpha file must be RGBA");
            }
            art::Raster alpha(rgba.height(), rgba.width(), 1);
            for (int y = 0; y < rgba.height(); ++y)
                for (int x = 0; x < rgba.width(); ++x)
                    alpha.at(y, x, 0) = rgba.at(y, x, 3);
            const art::Raster rgb = art::decode_transparency(gray, alpha);
            art::Raster out(rgb.height(), rgb.width(), 4);
            for (int y = 0; y < rgb.height(); ++y)
                for (int x = 0; x < rgb.width(); ++x) {
                    for (int c = 0; c < 3; ++c) out.at(y, x, c) = rgb.at(y, x, c);
                    out.at(y, x, 3) = alpha.at(y, x, 0);
                }
            art::write_png(out_png, out);
        } else if (rd->parsed()) {
            const auto layout = art::parse_layout(read_file(layout_file), cw, ch);
            art::AxesDim axes;
            if (std::sscanf(axes_str.c_str(), "%d,%d,%d", &axes.layer, &axes.y,
                            &axes.x) != 3) {
                throw art::ValidationError("bad --axes, expected d_layer,d_y,d_x");
            }
            const auto ids =
                art::prepare_latent_image_ids(art::sequence_layout(layout, {}), {});
            const art::RopeTables tables = art::rope_3d(ids, axes, theta);
            std::ostringstream csv;
            csv << "token,channel,cos,sin\n";
            for (std::size_t i = 0; i < tables.n; ++i) {
                for (std::size_t j = 0; j < tables.dim; ++j) {
                    csv << i << ',' << j << ',' << tables.cos[i * tables.dim + j] << ','
                        << tables.sin[i * tables.dim + j] << '\n';
                }
            }
            emit(csv.str());
        } else if (cs->parsed()) {
            const auto [rw, rh] = parse_size(region_str);
            const auto [k_min, k_max] = parse_range(k_str);
            art::AttentionConfig cfg;
            cfg.heads = heads;
            cfg.context_tokens = context_tokens;
            const auto rows = art::scaling_sweep(cw, ch, rw, rh, k_min, k_max,
                                                 art::scheme_from_name(scheme_str), {}, cfg);
            emit(art::sweep_to_csv(rows));
        } else if (mc->parsed()) {
            const art::Raster a = art::read_png(png_a);
            const art::Raster b = art::read_png(png_b);
            art::MetricReport report;
            report.psnr_merged = art::psnr(a, b, 2.0);
            report.ssim = art::ssim(a, b, 2.0);
            if (a.channels() == 4) {
                const auto [rgb, alpha] = art::layer_psnr({a}, {b});
                report.psnr_layer_rgb = rgb;
                report.psnr_layer_alpha = alpha;
            }
            emit(art::report_to_json(report) + "\n");
        }
    } catch (const art::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const art::NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}
