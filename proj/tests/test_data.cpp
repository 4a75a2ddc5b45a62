#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "usmt/data/preprocess.hpp"
#include "usmt/data/synth.hpp"
#include "usmt/metrics/metrics.hpp"

using usmt::ImageU8;
using usmt::PreprocessConfig;
using usmt::Rng;
using usmt::TaskType;
using usmt::TensorT;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto p = fs::temp_directory_path() / ("usmt_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string minimal_manifest(int n_tasks) {
    std::string tasks;
    for (int i = 0; i < n_tasks; ++i) {
        if (i) tasks += ",";
        tasks += R"({"task_id": "t)" + std::to_string(i) +
                 R"(", "type": "cls", "group": "G", "num_classes": 2,
                    "original_resolution": [64, 64],
                    "train": [{"image": "a.png", "label": {"class": 0}},
                              {"image": "b.png", "label": {"class": 1}}],
                    "test": []})";
    }
    return R"({"tasks": [)" + tasks + "]}";
}

}  // namespace

TEST_CASE("manifest: parses tasks, rejects duplicates and empty lists") {
    auto reg = usmt::parse_manifest(minimal_manifest(27), ".");
    CHECK(reg.tasks.size() == 27);
    CHECK(reg.find("t13") != nullptr);
    CHECK(reg.find("t13")->type == TaskType::cls);

    std::string dup = R"({"tasks": [
        {"task_id": "x", "type": "cls", "num_classes": 2, "train": [], "test": []},
        {"task_id": "x", "type": "seg", "train": [], "test": []}]})";
    CHECK_THROWS_WITH_AS(usmt::parse_manifest(dup, "."),
                         doctest::Contains("duplicate task id 'x'"), usmt::ValidationError);

    CHECK_THROWS_AS(usmt::parse_manifest(R"({"tasks": []})", "."), usmt::ValidationError);
    CHECK_THROWS_AS(usmt::parse_manifest("{}", "."), usmt::ValidationError);
    CHECK_THROWS_AS(usmt::parse_manifest("not json", "."), usmt::ValidationError);
}

TEST_CASE("manifest: schema violations carry the field path") {
    std::string bad_type = R"({"tasks": [{"task_id": "a", "type": "boxes"}]})";
    CHECK_THROWS_WITH_AS(usmt::parse_manifest(bad_type, "."),
                         doctest::Contains("tasks[0].type"), usmt::ValidationError);

    std::string bad_cls = R"({"tasks": [{"task_id": "a", "type": "cls", "num_classes": 1}]})";
    CHECK_THROWS_WITH_AS(usmt::parse_manifest(bad_cls, "."),
                         doctest::Contains("tasks[0].num_classes"), usmt::ValidationError);

    std::string bad_label = R"({"tasks": [{"task_id": "a", "type": "seg",
        "train": [{"image": "x.png", "label": {"class": 1}}]}]})";
    CHECK_THROWS_WITH_AS(usmt::parse_manifest(bad_label, "."),
                         doctest::Contains("tasks[0].train[0].label.mask"),
                         usmt::ValidationError);

    std::string bad_paradigm = R"({"tasks": [{"task_id": "a", "type": "cls",
        "num_classes": 2, "paradigms": ["ts", "xx"]}]})";
    CHECK_THROWS_WITH_AS(usmt::parse_manifest(bad_paradigm, "."),
                         doctest::Contains("paradigms"), usmt::ValidationError);
}

TEST_CASE("manifest: serialize and reload round-trips the registry") {
    auto reg = usmt::parse_manifest(minimal_manifest(3), ".");
    reg.tasks[1].paradigms = {"cg", "au"};
    reg.tasks[2].lambda = 0.5;
    auto back = usmt::parse_manifest(usmt::manifest_to_json(reg), ".");
    REQUIRE(back.tasks.size() == 3);
    CHECK(back.tasks[1].paradigms == std::set<std::string>{"cg", "au"});
    CHECK(back.tasks[2].lambda == 0.5);
    CHECK(back.tasks[0].train.size() == 2);
    CHECK(usmt::manifest_to_json(back) == usmt::manifest_to_json(reg));
}

TEST_CASE("png io: gray and rgb round trips") {
    auto dir = temp_dir("png");
    ImageU8 gray;
    gray.channels = 1;
    gray.height = 5;
    gray.width = 7;
    gray.data.resize(35);
    for (size_t i = 0; i < gray.data.size(); ++i) gray.data[i] = static_cast<uint8_t>(i * 3);
    usmt::write_png((dir / "g.png").string(), gray);
    auto gback = usmt::read_png((dir / "g.png").string());
    CHECK(gback.channels == 1);
    CHECK(gback.height == 5);
    CHECK(gback.width == 7);
    CHECK(gback.data == gray.data);

    ImageU8 rgb;
    rgb.channels = 3;
    rgb.height = 4;
    rgb.width = 4;
    rgb.data.resize(48);
    for (size_t i = 0; i < rgb.data.size(); ++i) rgb.data[i] = static_cast<uint8_t>(255 - i);
    usmt::write_png((dir / "c.png").string(), rgb);
    auto cback = usmt::read_png((dir / "c.png").string());
    CHECK(cback.data == rgb.data);

    CHECK_THROWS_AS(usmt::read_png((dir / "missing.png").string()), usmt::IoError);
    std::ofstream((dir / "bad.png").string()) << "not a png";
    CHECK_THROWS_AS(usmt::read_png((dir / "bad.png").string()), usmt::IoError);
}

TEST_CASE("preprocess: grayscale replication, resize, normalization") {
    ImageU8 raw;
    raw.channels = 1;
    raw.height = 300;
    raw.width = 400;
    raw.data.assign(300 * 400, 128);
    PreprocessConfig cfg;
    cfg.target_size = 224;
    auto img = usmt::preprocess_image(raw, cfg);
    CHECK(img.shape == std::vector<int>{3, 224, 224});
    float expected = static_cast<float>((128 / 255.0 - cfg.mean) / cfg.stddev);
    for (int c = 0; c < 3; ++c) CHECK(img.at3(c, 100, 100) == doctest::Approx(expected));
    // channels identical
    for (int i = 0; i < 224 * 224; ++i) {
        CHECK(img.data[i] == img.data[224 * 224 + i]);
        CHECK(img.data[i] == img.data[2 * 224 * 224 + i]);
    }
}

TEST_CASE("preprocess: same-size resize is the identity (idempotence)") {
    Rng rng(31);
    ImageU8 raw;
    raw.channels = 3;
    raw.height = 64;
    raw.width = 64;
    raw.data.resize(64 * 64 * 3);
    for (auto& v : raw.data) v = static_cast<uint8_t>(rng.uniform_int(0, 255));
    PreprocessConfig cfg;
    cfg.target_size = 64;
    auto img = usmt::preprocess_image(raw, cfg);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) {
                float expected =
                    static_cast<float>((raw.at(y, x, c) / 255.0 - cfg.mean) / cfg.stddev);
                CHECK(img.at3(c, y, x) == doctest::Approx(expected).epsilon(1e-6));
            }
}

TEST_CASE("preprocess: nearest mask resize preserves the id set") {
    Rng rng(32);
    TensorT<int> mask({37, 53});
    for (auto& v : mask.data) v = static_cast<int>(rng.uniform_int(0, 2));
    auto resized = usmt::resize_mask_nearest(mask, 64, 64);
    std::set<int> src(mask.data.begin(), mask.data.end());
    std::set<int> dst(resized.data.begin(), resized.data.end());
    for (int v : dst) CHECK(src.count(v) == 1);
}

TEST_CASE("regression scale arithmetic") {
    CHECK(usmt::regression_scale(448, 224) == doctest::Approx(2.0));
    CHECK(usmt::regression_scale(224, 224) == doctest::Approx(1.0));
    CHECK_THROWS_AS(usmt::regression_scale(0, 224), usmt::ValidationError);
}

TEST_CASE("split: 100 -> 80/20, 7 -> 6/1, determinism, disjointness") {
    auto [train, val] = usmt::split_train_val(100, 0.2, 42);
    CHECK(train.size() == 80);
    CHECK(val.size() == 20);

    auto [t7, v7] = usmt::split_train_val(7, 0.2, 1);
    CHECK(t7.size() == 6);
    CHECK(v7.size() == 1);

    auto [t2, v2] = usmt::split_train_val(100, 0.2, 42);
    CHECK(t2 == train);
    CHECK(v2 == val);
    auto [t3, v3] = usmt::split_train_val(100, 0.2, 43);
    CHECK(t3 != train);

    std::set<int> all(train.begin(), train.end());
    all.insert(val.begin(), val.end());
    CHECK(all.size() == 100);

    CHECK_THROWS_AS(usmt::split_train_val(1, 0.2, 0), usmt::ValidationError);
}

TEST_CASE("synth: deterministic bytes, exact labels, loadable manifest") {
    auto dir_a = temp_dir("synth_a");
    auto dir_b = temp_dir("synth_b");
    std::string plan_text = R"({"tasks": [
        {"task_id": "g_seg", "type": "seg", "group": "G", "train_count": 3, "test_count": 1,
         "original_resolution": [64, 64]},
        {"task_id": "g_cls", "type": "cls", "group": "G", "train_count": 4, "test_count": 1,
         "num_classes": 2, "original_resolution": [64, 64]},
        {"task_id": "g_reg", "type": "reg", "group": "G", "train_count": 3, "test_count": 1,
         "original_resolution": [64, 64]},
        {"task_id": "g_det", "type": "det", "group": "G", "train_count": 3, "test_count": 1,
         "original_resolution": [64, 64]}]})";
    auto plan = usmt::parse_synth_plan(plan_text);
    auto reg_a = usmt::synth_generate(plan, 9, dir_a.string());
    auto reg_b = usmt::synth_generate(plan, 9, dir_b.string());
    CHECK(reg_a.tasks.size() == 4);

    // byte-identical datasets for the same seed
    for (auto& t : reg_a.tasks)
        for (auto& r : t.train) {
            std::ifstream fa(dir_a / r.image, std::ios::binary);
            std::ifstream fb(dir_b / r.image, std::ios::binary);
            std::string ba((std::istreambuf_iterator<char>(fa)),
                           std::istreambuf_iterator<char>());
            std::string bb((std::istreambuf_iterator<char>(fb)),
                           std::istreambuf_iterator<char>());
            CHECK(ba == bb);
        }

    // reload the written manifest and load every dataset
    auto loaded = usmt::load_manifest((dir_a / "manifest.json").string());
    CHECK(loaded.tasks.size() == 4);
    PreprocessConfig cfg;
    cfg.target_size = 64;
    for (auto& spec : loaded.tasks) {
        auto ds = usmt::load_task_dataset(spec, loaded.base_dir, cfg);
        CHECK(ds.train.size() == spec.train.size());
        if (spec.type == TaskType::seg) {
            // mask ids {0,1} survive loading
            for (auto& s : ds.train)
                for (int v : s.mask.data) CHECK((v == 0 || v == 1));
        }
        if (spec.type == TaskType::reg)
            for (auto& s : ds.train) {
                CHECK(s.reg_original > 0);
                CHECK(s.reg_target == doctest::Approx(s.reg_original / s.scale));
            }
    }

    // refuse to overwrite without force
    CHECK_THROWS_AS(usmt::synth_generate(plan, 9, dir_a.string()), usmt::ValidationError);
    CHECK_NOTHROW(usmt::synth_generate(plan, 9, dir_a.string(), true));
}

TEST_CASE("synth: perfect oracle predictions score perfectly through the metrics") {
    auto dir = temp_dir("synth_oracle");
    std::string plan_text = R"({"tasks": [
        {"task_id": "o_seg", "type": "seg", "group": "G", "train_count": 4,
         "original_resolution": [96, 96]},
        {"task_id": "o_det", "type": "det", "group": "G", "train_count": 4,
         "original_resolution": [96, 96]},
        {"task_id": "o_reg", "type": "reg", "group": "G", "train_count": 4,
         "original_resolution": [96, 96]}]})";
    auto reg = usmt::synth_generate(usmt::parse_synth_plan(plan_text), 3, dir.string());
    PreprocessConfig cfg;
    cfg.target_size = 96;
    for (auto& spec : reg.tasks) {
        auto ds = usmt::load_task_dataset(spec, reg.base_dir, cfg);
        for (auto& s : ds.train) {
            if (spec.type == TaskType::seg)
                CHECK(usmt::metrics::dsc(s.mask, s.mask) == doctest::Approx(1.0));
            if (spec.type == TaskType::det)
                CHECK(usmt::metrics::box_iou(s.box, s.box) == doctest::Approx(1.0));
            if (spec.type == TaskType::reg)
                CHECK(usmt::metrics::mre({s.reg_target}, {s.reg_original}, {s.scale}) <
                      1e-9);
        }
    }
}

TEST_CASE("synth plan: invalid fields are named, zero count rejected") {
    CHECK_THROWS_WITH_AS(usmt::parse_synth_plan(R"({"tasks": [{"type": "cls",
                              "train_count": 0}]})"),
                         doctest::Contains("tasks[0].train_count"), usmt::ValidationError);
    CHECK_THROWS_WITH_AS(usmt::parse_synth_plan(R"({"tasks": [{"type": "wat",
                              "train_count": 2}]})"),
                         doctest::Contains("unknown task type"), usmt::ValidationError);
    CHECK_THROWS_AS(usmt::parse_synth_plan(R"({"tasks": []})"), usmt::ValidationError);
}

TEST_CASE("synth: table-shaped plan produces the grouped 13-task manifest") {
    std::string plan_text = R"({"tasks": [
        {"task_id": "ob_cervical_reg",   "type": "reg", "group": "OB", "train_count": 2},
        {"task_id": "ob_progress_reg",   "type": "reg", "group": "OB", "train_count": 2},
        {"task_id": "ob_femur_reg",      "type": "reg", "group": "OB", "train_count": 2},
        {"task_id": "ob_abdomen_seg",    "type": "seg", "group": "OB", "train_count": 2},
        {"task_id": "ob_head_seg",       "type": "seg", "group": "OB", "train_count": 2},
        {"task_id": "ob_organs_cls",     "type": "cls", "group": "OB", "train_count": 2},
        {"task_id": "ob_breech_cls",     "type": "cls", "group": "OB", "train_count": 2},
        {"task_id": "lung_seg",          "type": "seg", "group": "Lung", "train_count": 2},
        {"task_id": "lung_cls",          "type": "cls", "group": "Lung", "train_count": 2},
        {"task_id": "lung_severity_cls", "type": "cls", "group": "Lung", "train_count": 2,
         "paradigms": ["cg", "au"]},
        {"task_id": "breast_cls",        "type": "cls", "group": "Breast", "train_count": 2},
        {"task_id": "breast_seg",        "type": "seg", "group": "Breast", "train_count": 2},
        {"task_id": "breast_margin_seg", "type": "seg", "group": "Breast", "train_count": 2,
         "paradigms": ["cg", "au"]}]})";
    auto plan = usmt::parse_synth_plan(plan_text);
    CHECK(plan.tasks.size() == 13);
    auto dir = temp_dir("synth_t1");
    for (auto& t : plan.tasks) t.original_resolution = {48, 48};
    auto reg = usmt::synth_generate(plan, 5, dir.string());
    CHECK(reg.tasks.size() == 13);
    int ts_eligible = 0;
    for (auto& t : reg.tasks) ts_eligible += t.in_paradigm("ts") ? 1 : 0;
    CHECK(ts_eligible == 11);
}
