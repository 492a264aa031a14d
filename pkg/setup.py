from setuptools import Extension, setup
from Cython.Build import cythonize

ext = Extension("ckgru._cell_cy", sources=["src/ckgru/_cell_cy.pyx"])

setup(
    ext_modules=cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    ),
)
