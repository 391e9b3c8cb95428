# anchors the test root so `import _reference` resolves from any cwd
