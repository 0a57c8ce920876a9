"""
FastMCP Server implementation for the QIGL toolkit.
Exposes tools for sampling images from, evaluating, and inspecting trained checkpoints.
"""

import json
import pathlib

from fastmcp import FastMCP

from config import get_data_dir, logger
from pipeline import cmd_evaluate, cmd_generate, describe_checkpoint

DATA_DIR = get_data_dir()

INSTRUCTIONS = (
    "You operate a quantum-classical generative image toolkit. Checkpoints are "
    "produced by `qigl train`. Use 'describe_checkpoint' to inspect one, "
    "'generate_images' to sample grayscale images from it, and "
    "'evaluate_checkpoint' to measure how close its samples are to the real data "
    "(lower Fréchet distance is better; values are not comparable to published FID)."
)

# Initialize FastMCP Server
mcp = FastMCP("QIGL", instructions=INSTRUCTIONS)


def _resolve(checkpoint):
    """Absolute paths pass through; relative ones are looked up under DATA_DIR first."""
    path = pathlib.Path(checkpoint).expanduser()
    if not path.is_absolute() and not path.exists() and (DATA_DIR / path).exists():
        return DATA_DIR / path
    return path


# Core implementation functions (testable without FastMCP decorator)
def _generate_impl(checkpoint: str, n: int = 8, out_dir: str = None, seed: int = None) -> str:
    """
    Core implementation for sampling images. Extracted for testability.

    Args:
        checkpoint: Path to a .qckpt file.
        n: Number of images to write.
        out_dir: Destination folder (defaults to DATA_DIR/samples/<checkpoint name>).
        seed: Optional sampling seed.
    """
    try:
        path = _resolve(checkpoint)
        target = pathlib.Path(out_dir) if out_dir else DATA_DIR / "samples" / path.stem
        paths = cmd_generate(path, n, target, seed=seed)
        logger.info(f"Generated {len(paths)} images from {path}")
        if not paths:
            return "No images requested."
        return f"Wrote {len(paths)} images to {target}:\n" + "\n".join(str(p) for p in paths)
    except Exception as e:
        logger.error(f"Error in generate_images: {str(e)}")
        return f"Error in generate_images: {str(e)}"


def _evaluate_impl(checkpoint: str, datasets: list = None, n: int = 256, space: str = "features") -> str:
    """
    Core implementation for evaluating a checkpoint. Extracted for testability.

    Args:
        checkpoint: Path to a .qckpt file.
        datasets: Optional dataset directories; defaults to the training data.
        n: Number of generated samples.
        space: "features" or "pixels".
    """
    try:
        report = cmd_evaluate(_resolve(checkpoint), datasets or (), n, space)
        output = [
            f"--- Fréchet distance ({report.space} space, epoch {report.checkpoint_epoch}) ---",
            f"Fréchet: {report.frechet:.6f}",
        ]
        if report.baseline is not None:
            output.append(f"Real-vs-real baseline: {report.baseline:.6f}")
        for label, value in (report.per_class or {}).items():
            output.append(f"  {label}: {value:.6f}")
        output.append(report.disclaimer)
        return "\n".join(output)
    except Exception as e:
        logger.error(f"Error in evaluate_checkpoint: {str(e)}")
        return f"Error in evaluate_checkpoint: {str(e)}"


def _describe_impl(checkpoint: str) -> str:
    """Core implementation for describing a checkpoint. Extracted for testability."""
    path = _resolve(checkpoint)
    if not path.exists():
        return f"Error: No checkpoint found at '{checkpoint}'. Run 'qigl train' first."
    try:
        return json.dumps(describe_checkpoint(path), indent=2)
    except Exception as e:
        logger.error(f"Error in describe_checkpoint: {str(e)}")
        return f"Error in describe_checkpoint: {str(e)}"


# FastMCP decorated functions (wrappers around implementation)
@mcp.tool(name="generate_images")
def generate_images_tool(checkpoint: str, n: int = 8, out_dir: str = None, seed: int = None) -> str:
    """
    Sample grayscale images from a trained checkpoint and save them as PGM files.

    Args:
        checkpoint: Path to a .qckpt checkpoint.
        n: Number of images to generate.
        out_dir: Optional destination folder.
        seed: Optional sampling seed for reproducible output.
    """
    return _generate_impl(checkpoint, n, out_dir, seed)


@mcp.tool(name="evaluate_checkpoint")
def evaluate_checkpoint_tool(checkpoint: str, datasets: list[str] = None, n: int = 256, space: str = "features") -> str:
    """
    Compute the Fréchet distance between a checkpoint's samples and real images.

    Args:
        checkpoint: Path to a .qckpt checkpoint.
        datasets: Optional dataset directories (one per class); defaults to the training data.
        n: Number of generated samples.
        space: "features" (PCA feature space) or "pixels".
    """
    return _evaluate_impl(checkpoint, datasets, n, space)


@mcp.tool(name="describe_checkpoint")
def describe_checkpoint_tool(checkpoint: str) -> str:
    """
    Summarise a checkpoint: configuration, feature count, and Fréchet history.

    Args:
        checkpoint: Path to a .qckpt checkpoint.
    """
    return _describe_impl(checkpoint)


def run():
    """Entry point for the MCP server."""
    mcp.run()
