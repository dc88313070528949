"""Builds the native extension through the project's CMake tree and drops it
inside the ``dhcn`` package, so ``pip install --no-build-isolation .`` (or
``-e .``) works without a separate build step."""

import os
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name, sourcedir=""):
        super().__init__(name, sources=[])
        self.sourcedir = os.path.abspath(sourcedir)


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        extdir = os.path.abspath(os.path.dirname(self.get_ext_fullpath(ext.name)))
        build_temp = os.path.join(self.build_temp, ext.name)
        os.makedirs(build_temp, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                ext.sourcedir,
                f"-DCMAKE_LIBRARY_OUTPUT_DIRECTORY={extdir}",
                f"-DPython3_EXECUTABLE={sys.executable}",
                "-DCMAKE_BUILD_TYPE=Release",
            ],
            cwd=build_temp,
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", ".", "--target", "_dhcn", "-j4"],
            cwd=build_temp,
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("dhcn._dhcn")],
    cmdclass={"build_ext": CMakeBuild},
)
