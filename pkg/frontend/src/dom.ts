import { ScalarSpan, scalarToUtf16 } from "./offsets.js";

export interface Segment {
  text: string;
  marked: boolean;
}

/**
 * Split a section body into plain and highlighted segments from scalar
 * spans.  Overlapping or touching spans merge into one highlight; the
 * concatenation of all segments is always the original body, so nothing
 * the annotator reads is ever lost to the markup.
 */
export function segmentBody(body: string, spans: ScalarSpan[]): Segment[] {
  const ordered = [...spans].sort((a, b) => a.start - b.start || a.end - b.end);
  const merged: ScalarSpan[] = [];
  for (const span of ordered) {
    const last = merged[merged.length - 1];
    if (last && span.start <= last.end) {
      last.end = Math.max(last.end, span.end);
    } else {
      merged.push({ ...span });
    }
  }
  const segments: Segment[] = [];
  let cursor = 0;
  for (const span of merged) {
    const from = scalarToUtf16(body, span.start);
    const to = scalarToUtf16(body, span.end);
    if (from > scalarToUtf16(body, cursor)) {
      segments.push({ text: body.slice(scalarToUtf16(body, cursor), from), marked: false });
    }
    segments.push({ text: body.slice(from, to), marked: true });
    cursor = span.end;
  }
  const tailFrom = scalarToUtf16(body, cursor);
  if (tailFrom < body.length) {
    segments.push({ text: body.slice(tailFrom), marked: false });
  }
  return segments;
}

type Attrs = Record<string, string> & { onclick?: never };

/** Small element builder; text children are inserted as text, never HTML. */
export function el(tag: string, attrs: Attrs = {}, ...children: (Node | string)[]): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) {
    node.append(child);
  }
  return node;
}

/** Render a body with <mark> highlights into a container. */
export function renderBody(container: HTMLElement, body: string, spans: ScalarSpan[]): void {
  container.textContent = "";
  for (const segment of segmentBody(body, spans)) {
    if (segment.marked) {
      container.append(el("mark", {}, segment.text));
    } else {
      container.append(document.createTextNode(segment.text));
    }
  }
}

/**
 * UTF-16 offsets of the current selection inside a container that was
 * rendered with renderBody.  Walks the text nodes so offsets are against
 * the full body string regardless of highlight markup.  Null when the
 * selection is empty or outside the container.
 */
export function selectionOffsets(container: HTMLElement): { start: number; end: number } | null {
  const selection = window.getSelection();
  if (!selection || selection.rangeCount === 0 || selection.isCollapsed) return null;
  const range = selection.getRangeAt(0);
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return null;
  }
  const offsetOf = (target: Node, offset: number): number => {
    let total = 0;
    const walker = document.createTreeWalker(container, NodeFilter.SHOW_TEXT);
    for (let node = walker.nextNode(); node; node = walker.nextNode()) {
      if (node === target) return total + offset;
      total += (node.textContent ?? "").length;
    }
    // target is an element node: offset counts child nodes, not characters
    return total;
  };
  return {
    start: offsetOf(range.startContainer, range.startOffset),
    end: offsetOf(range.endContainer, range.endOffset),
  };
}
