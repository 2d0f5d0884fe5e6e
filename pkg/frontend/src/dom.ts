// Small DOM helpers; no framework.

export function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = [],
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    if (key === "class") node.className = value;
    else node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child instanceof Node ? child : document.createTextNode(child));
  }
  return node;
}

export function clear(node: HTMLElement): HTMLElement {
  while (node.firstChild) node.removeChild(node.firstChild);
  return node;
}

// Plain HTML bar chart, one row per label.
export function barChart(
  labels: string[],
  series: Array<{ name: string; values: number[] }>,
): HTMLElement {
  const container = el("div", { class: "chart" });
  const max = Math.max(1e-9, ...series.flatMap((s) => s.values));
  labels.forEach((label, i) => {
    const row = el("div", { class: "chart-row" }, [
      el("span", { class: "chart-label" }, [label]),
    ]);
    for (const s of series) {
      const value = s.values[i] ?? 0;
      const bar = el("span", { class: `bar bar-${s.name}` });
      bar.style.width = `${(100 * value) / max}%`;
      bar.title = `${s.name}: ${value}`;
      row.append(bar);
    }
    container.append(row);
  });
  return container;
}
