#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "streamchar/runconfig.hpp"
#include "streamchar/stream.hpp"

namespace fs = std::filesystem;
using namespace streamchar;
using nlohmann::json;

namespace {

std::string out_root() {
    const char* env = std::getenv("STREAMCHAR_OUT");
    std::string root = env ? env : "streamchar_out";
    fs::create_directories(root);
    return root;
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream f(path);
    require(f.good(), "cannot open config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_config(ss.str());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    require(f.good(), "cannot open " + path);
    f << text;
}

int cmd_train_teacher(const std::string& cfg_path, std::size_t steps_override,
                      const std::string& tag) {
    RunConfig rc = load_config(cfg_path);
    if (steps_override) rc.teacher_steps = steps_override;
    std::string root = out_root();

    System sys(rc.sys);
    Rng rng(rc.seed);
    std::ofstream trace(root + "/" + tag + ".trace.jsonl");
    if (rc.warmup_steps) {
        double warm = sys.pretrain_orchestrator(rc.warmup_steps, rc.warmup_lr, rng);
        trace << json{{"event", "warmup_done"},
                      {"steps", rc.warmup_steps},
                      {"readout_loss", warm}}
                     .dump()
              << "\n";
    }
    sys.train_teacher(
        rc.teacher_steps, rc.teacher_lr, rng,
        [&](const System::TrainLog& l) {
            if (l.step % 50 == 0 || l.step + 1 == rc.teacher_steps)
                trace << json{{"event", "teacher_step"},
                              {"step", l.step},
                              {"flow_loss", l.flow_loss},
                              {"pap_loss", l.pap_loss}}
                             .dump()
                      << "\n";
        },
        rc.teacher_orch_lr);
    save_checkpoint(root + "/" + tag + ".sck",
                    {&sys.orch.params(), &sys.dit.params(), &sys.pap.params()}, serialize(rc));
    write_text(root + "/" + tag + ".config", serialize(rc));
    std::cout << "wrote " << root << "/" << tag << ".sck\n";
    return 0;
}

int cmd_distill(const std::string& cfg_path, const std::string& teacher_path, std::string stage,
                bool skip_stage1, std::size_t loss_window, bool no_sink) {
    RunConfig rc = load_config(cfg_path);
    if (loss_window) rc.distill.loss_window = loss_window;
    if (no_sink) rc.distill.use_sink = false;
    std::string root = out_root();

    System sys(rc.sys);
    std::string tpath = teacher_path.empty() ? root + "/teacher.sck" : teacher_path;
    load_checkpoint(tpath, {&sys.orch.params(), &sys.dit.params(), &sys.pap.params()});

    Distiller dist(sys, rc.distill);
    Rng rng(hash_combine(rc.seed, 0xd157u));
    std::ofstream trace(root + "/distill.trace.jsonl");

    bool do1 = stage == "1" || stage == "both";
    bool do2 = stage == "2" || stage == "both";
    require(do1 || do2, "distill: stage must be 1, 2, or both");
    if (do1) {
        dist.run_stage1(rng, &trace);
        save_checkpoint(root + "/student_stage1.sck", dist.student.params(), serialize(rc));
        std::cout << "wrote " << root << "/student_stage1.sck\n";
    }
    if (do2) {
        if (!do1) {
            std::string s1 = root + "/student_stage1.sck";
            if (!skip_stage1) {
                require(fs::exists(s1), "distill stage 2 needs " + s1 + " (or --skip-stage1)");
                load_checkpoint(s1, dist.student.params());
                dist.fake.params().copy_values_from(dist.student.params());
            }
        }
        dist.run_stage2(rng, &trace);
        save_checkpoint(root + "/student_stage2.sck", dist.student.params(), serialize(rc));
        std::cout << "wrote " << root << "/student_stage2.sck\n";
    }
    return 0;
}

int cmd_stream(const std::string& cfg_path, const std::string& student_path,
               std::size_t n_chunks, std::size_t transcript_tokens, bool no_sink,
               const std::string& tag) {
    RunConfig rc = load_config(cfg_path);
    std::string root = out_root();

    System sys(rc.sys);
    std::string spath = student_path.empty() ? root + "/student_stage2.sck" : student_path;
    // stream with whatever checkpoint is given; a teacher checkpoint also
    // carries dit.* arrays and works here.
    JointDenoiser net(sys.cfg.dit);
    load_checkpoint(spath, {&sys.orch.params(), &net.params(), &sys.pap.params()});

    if (transcript_tokens == 0) {
        save_stream(root + "/" + tag + ".scs", sys.cfg.world, {});
        std::cout << "empty transcript: wrote 0 chunks\n";
        return 0;
    }
    SynthSample script = gen_sample(sys.cfg.world, transcript_tokens, hash_combine(rc.seed, 5));
    save_sample(root + "/" + tag + ".script.scw", sys.cfg.world, script);

    StreamEngine eng(sys, net, script, !no_sink);
    Rng rng(hash_combine(rc.seed, 0x57124Du));
    std::vector<StreamChunk> chunks;
    std::ofstream lat(root + "/" + tag + ".latency.jsonl");
    LatentBlock all_v, all_a;
    for (std::size_t i = 0; i < n_chunks && !eng.done(); ++i) {
        StreamChunk c = eng.step(rng);
        lat << json{{"event", "chunk_latency"},
                    {"chunk", c.index},
                    {"generate_s", c.lat.measured.generate},
                    {"decode_s", c.lat.measured.decode},
                    {"preprocess_s", c.lat.measured.preprocess},
                    {"write_s", c.lat.measured.write},
                    {"budget_s", c.lat.content_seconds},
                    {"overlap_wall_s", c.lat.measured.overlap()},
                    {"real_time", c.lat.within_budget()}}
                   .dump()
            << "\n";
        all_v = concat_frames(all_v, c.z_v);
        all_a = concat_frames(all_a, c.z_a);
        chunks.push_back(std::move(c));
    }
    save_stream(root + "/" + tag + ".scs", sys.cfg.world, chunks);

    json report{{"chunks", chunks.size()}, {"cursor", chunks.empty() ? 0.0 : chunks.back().cursor}};
    if (!chunks.empty()) {
        RefStats ref = compute_ref_stats(sys.cfg.world, 16, 24, hash_combine(rc.seed, 9));
        std::vector<double> qs = quality_series(all_v, all_a, ref, sys.cfg.world.latent_video_fps,
                                                sys.cfg.world.latent_audio_rate);
        report["quality_proxy"] =
            quality_proxy(all_v, all_a, ref, sys.cfg.world.latent_video_fps,
                          sys.cfg.world.latent_audio_rate);
        if (qs.size() >= 30) report["drift"] = drift(qs);
    }
    write_text(root + "/" + tag + ".report.json", report.dump(2) + "\n");
    std::cout << report.dump(2) << "\n";
    return 0;
}

int cmd_eval(const std::string& cfg_path, const std::string& stream_path,
             const std::string& script_path) {
    RunConfig rc = load_config(cfg_path);
    WorldConfig wcfg;
    std::vector<StreamChunk> chunks = load_stream(stream_path, wcfg);
    wcfg.token_dur_min = rc.sys.world.token_dur_min;
    wcfg.token_dur_max = rc.sys.world.token_dur_max;
    wcfg.seed = rc.sys.world.seed;

    LatentBlock all_v, all_a;
    bool monotone = true;
    double prev = 0.0;
    StageTimes lat_sum;
    for (const StreamChunk& c : chunks) {
        all_v = concat_frames(all_v, c.z_v);
        all_a = concat_frames(all_a, c.z_a);
        if (c.cursor < prev) monotone = false;
        prev = c.cursor;
        lat_sum.generate += c.lat.measured.generate;
        lat_sum.decode += c.lat.measured.decode;
        lat_sum.preprocess += c.lat.measured.preprocess;
        lat_sum.write += c.lat.measured.write;
    }

    json report{{"chunks", chunks.size()}, {"cursor_monotone", monotone}};
    if (!chunks.empty()) {
        double n = static_cast<double>(chunks.size());
        report["latency_mean"] = json{{"generate_s", lat_sum.generate / n},
                                      {"decode_s", lat_sum.decode / n},
                                      {"preprocess_s", lat_sum.preprocess / n},
                                      {"write_s", lat_sum.write / n}};
        RefStats ref = compute_ref_stats(wcfg, 16, 24, hash_combine(wcfg.seed, 9));
        std::vector<double> qs = quality_series(all_v, all_a, ref, wcfg.latent_video_fps,
                                                wcfg.latent_audio_rate);
        report["quality_proxy"] = quality_proxy(all_v, all_a, ref, wcfg.latent_video_fps,
                                                wcfg.latent_audio_rate);
        if (qs.size() >= 30) report["drift"] = drift(qs);
        if (!script_path.empty()) {
            WorldConfig scfg;
            SynthSample script = load_sample(script_path, scfg);
            // score only the part of the transcript the audio could cover
            std::vector<std::uint32_t> toks;
            std::vector<std::size_t> durs;
            std::size_t acc = 0;
            for (std::size_t i = 0; i < script.tokens.size(); ++i) {
                if (acc + script.durations[i] > all_a.frames) break;
                toks.push_back(script.tokens[i]);
                durs.push_back(script.durations[i]);
                acc += script.durations[i];
            }
            if (!toks.empty()) report["wer_proxy"] = wer_proxy(scfg, toks, durs, all_a);
        }
    }
    std::cout << report.dump(2) << "\n";
    std::string root = out_root();
    write_text(root + "/eval.report.json", report.dump(2) + "\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming joint audio/video generation toolkit"};
    app.require_subcommand(1);

    std::string cfg_path, tag = "teacher", teacher_path, student_path, stage = "both";
    std::string stream_path, script_path, stream_tag = "stream";
    std::size_t steps = 0, loss_window = 0, n_chunks = 20, transcript_tokens = 48;
    bool skip_stage1 = false, no_sink = false;

    CLI::App* tt = app.add_subcommand("train-teacher", "joint pretraining on the synthetic world");
    tt->add_option("--config", cfg_path);
    tt->add_option("--steps", steps);
    tt->add_option("--tag", tag);

    CLI::App* di = app.add_subcommand("distill", "few-step distillation (stage 1, 2, or both)");
    di->add_option("--config", cfg_path);
    di->add_option("--teacher", teacher_path);
    di->add_option("--stage", stage)->check(CLI::IsMember({"1", "2", "both"}));
    di->add_flag("--skip-stage1", skip_stage1);
    di->add_option("--loss-window", loss_window);
    di->add_flag("--no-sink", no_sink);

    CLI::App* st = app.add_subcommand("stream", "chunked real-time rollout to a container");
    st->add_option("--config", cfg_path);
    st->add_option("--student", student_path);
    st->add_option("--n-chunks", n_chunks);
    st->add_option("--transcript-tokens", transcript_tokens);
    st->add_flag("--no-sink", no_sink);
    st->add_option("--tag", stream_tag);

    CLI::App* ev = app.add_subcommand("eval", "metrics report over a stream container");
    ev->add_option("--config", cfg_path);
    ev->add_option("--stream", stream_path)->required();
    ev->add_option("--script", script_path);

    try {
        app.parse(argc, argv);
        if (tt->parsed()) return cmd_train_teacher(cfg_path, steps, tag);
        if (di->parsed())
            return cmd_distill(cfg_path, teacher_path, stage, skip_stage1, loss_window, no_sink);
        if (st->parsed())
            return cmd_stream(cfg_path, student_path, n_chunks, transcript_tokens, no_sink,
                              stream_tag);
        if (ev->parsed()) return cmd_eval(cfg_path, stream_path, script_path);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const numerical_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
