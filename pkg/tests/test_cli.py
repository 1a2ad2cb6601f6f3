import time
from pathlib import Path

import httpx
import pytest

from phyloflow.cli import main
from phyloflow.phylomodel import count_topologies

FASTA = ">a\nACGTACGTACGGTTAC\n>b\nACGTACGAACGGTAAC\n>c\nTCGTACGAACGCTATC\n>d\nTCGAACGAACGCTATC\n"


@pytest.fixture()
def fasta_file(tmp_path):
    path = tmp_path / "primates.fasta"
    path.write_text(FASTA)
    return path


class TestCountTrees:
    def test_headline_value(self, capsys):
        assert main(["count-trees", "30"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == str(count_topologies(30))
        assert out[1] == "≈8.69e36"

    def test_small(self, capsys):
        assert main(["count-trees", "5"]) == 0
        assert capsys.readouterr().out.splitlines()[0] == "15"

    def test_too_small_is_data_error(self):
        assert main(["count-trees", "2"]) == 2


class TestConvert:
    def test_fasta_to_nexus_stdout(self, fasta_file, capsys):
        assert main(["convert", str(fasta_file)]) == 0
        out = capsys.readouterr().out
        assert out.startswith("#NEXUS\n")
        assert "dimensions ntax=4 nchar=16;" in out

    def test_out_file(self, fasta_file, tmp_path):
        target = tmp_path / "converted.nex"
        assert main(["convert", str(fasta_file), "--out", str(target)]) == 0
        assert target.read_text().startswith("#NEXUS")

    def test_malformed_is_exit_2_with_line(self, tmp_path, capsys):
        bad = tmp_path / "bad.fa"
        bad.write_text(">a\nACGT\n>b\nACXT\n")
        assert main(["convert", str(bad)]) == 2
        assert "line 4" in capsys.readouterr().err

    def test_missing_file_is_exit_3(self):
        assert main(["convert", "/no/such/file.fa"]) == 3


class TestUsage:
    def test_no_arguments(self, capsys):
        assert main([]) == 1

    def test_unknown_subcommand(self, capsys):
        assert main(["frobnicate"]) == 1

    def test_run_missing_required(self, fasta_file):
        assert main(["run", str(fasta_file)]) == 1


class TestAlign:
    def test_writes_nexus_profile_and_plot(self, tmp_path, capsys):
        ragged = tmp_path / "ragged.fa"
        ragged.write_text(">a\nACGTTACA\n>b\nACGTACA\n>c\nACGTT\n")
        out = tmp_path / "aligned.nex"
        profile = tmp_path / "cons.tsv"
        figs = tmp_path / "figs"
        assert main(["align", str(ragged), "--out", str(out),
                     "--profile", str(profile), "--plot", str(figs)]) == 0
        assert out.read_text().startswith("#NEXUS")
        lines = profile.read_text().splitlines()
        assert lines[0] == "column\tconservation"
        assert len(lines) >= 8
        assert (figs / "conservation.png").stat().st_size > 0
        assert "mean conservation:" in capsys.readouterr().err


class TestRunAndConsensus:
    def test_run_produces_all_files(self, fasta_file, tmp_path, capsys):
        outdir = tmp_path / "out"
        code = main([
            "run", str(fasta_file), "--lset", "nst=6 rates=gamma",
            "--ngen", "400", "--samplefreq", "100", "--runs", "2",
            "--seed", "7", "--filebase", "primates.nex", "--nchains", "2",
            "--outdir", str(outdir),
        ])
        assert code == 0
        names = sorted(p.name for p in outdir.iterdir())
        assert names == sorted(
            f"primates.nex{r}.{ext}" for r in (1, 2) for ext in ("p", "t", "mcmc")
        )
        stdout = capsys.readouterr().out
        assert "run 1: 5 samples" in stdout

    def test_workers_do_not_change_bytes(self, fasta_file, tmp_path):
        args = ["run", str(fasta_file), "--lset", "nst=1", "--ngen", "300",
                "--samplefreq", "100", "--runs", "2", "--seed", "3",
                "--filebase", "d.nex", "--nchains", "2"]
        one = tmp_path / "w1"
        two = tmp_path / "w2"
        assert main(args + ["--outdir", str(one), "--workers", "1"]) == 0
        assert main(args + ["--outdir", str(two), "--workers", "2"]) == 0
        for name in ("d.nex1.p", "d.nex1.t", "d.nex2.p", "d.nex2.t"):
            assert (one / name).read_bytes() == (two / name).read_bytes()

    def test_unaligned_input_is_data_error(self, tmp_path):
        ragged = tmp_path / "ragged.fa"
        ragged.write_text(">a\nACGTTACA\n>b\nACGTACA\n")
        assert main(["run", str(ragged), "--ngen", "100",
                     "--samplefreq", "10"]) == 2

    def test_consensus_command(self, fasta_file, tmp_path, capsys):
        outdir = tmp_path / "out"
        main(["run", str(fasta_file), "--lset", "nst=1", "--ngen", "400",
              "--samplefreq", "100", "--runs", "2", "--seed", "11",
              "--filebase", "c.nex", "--nchains", "1",
              "--outdir", str(outdir)])
        capsys.readouterr()
        target = tmp_path / "cons.tre"
        code = main(["consensus", str(outdir / "c.nex1.t"),
                     str(outdir / "c.nex2.t"), "--burnin", "0.25",
                     "--out", str(target)])
        assert code == 0
        captured = capsys.readouterr()
        assert captured.out.strip().endswith(";")
        assert "avg split-frequency sd" in captured.err
        assert target.read_text().strip() == captured.out.strip()

    def test_run_with_report_flag(self, fasta_file, tmp_path):
        outdir = tmp_path / "out"
        assert main(["run", str(fasta_file), "--lset", "nst=1",
                     "--ngen", "300", "--samplefreq", "100",
                     "--filebase", "r.nex", "--nchains", "1",
                     "--outdir", str(outdir), "--report"]) == 0
        report = outdir / "report"
        for name in ("trace.png", "runs.tsv", "consensus.png", "splits.tsv"):
            assert (report / name).exists(), name


@pytest.mark.usefixtures("live_server")
class TestJobsClient:
    def _seed_job(self, server):
        with httpx.Client(base_url=server, timeout=30) as client:
            token = client.post("/api/login",
                                json={"username": "cli_user"}).json()["token"]
            auth = {"Authorization": f"Bearer {token}"}
            job_id = client.post(
                "/api/jobs",
                json={"name": "from api", "description": "remote job"},
                headers=auth,
            ).json()["id"]
            return job_id

    def test_list_show_cancel(self, live_server, capsys):
        job_id = self._seed_job(live_server)
        assert main(["jobs", "list", "--server", live_server,
                     "--user", "cli_user"]) == 0
        out = capsys.readouterr().out
        assert job_id in out and "in progress" in out and "from api" in out

        assert main(["jobs", "show", job_id, "--server", live_server,
                     "--user", "cli_user"]) == 0
        assert "Draft" in capsys.readouterr().out

        assert main(["jobs", "cancel", job_id, "--server", live_server,
                     "--user", "cli_user"]) == 0
        assert "Cancelled" in capsys.readouterr().out

    def test_show_missing_id_is_data_error(self, live_server):
        assert main(["jobs", "show", "--server", live_server,
                     "--user", "cli_user"]) == 2

    def test_unreachable_server_is_runtime_error(self):
        assert main(["jobs", "list", "--server", "http://127.0.0.1:9",
                     "--user", "x"]) == 3
