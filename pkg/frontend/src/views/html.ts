/** Tiny HTML templating helpers shared by the page renderers. */

export function escapeHtml(value: unknown): string {
  return String(value)
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;")
    .replaceAll("'", "&#39;");
}

/** Template literal tag escaping every interpolated value. */
export function html(strings: TemplateStringsArray, ...values: unknown[]): string {
  return strings.reduce((out, chunk, i) => {
    const value = values[i - 1];
    const rendered = value instanceof Raw ? value.text : escapeHtml(value ?? "");
    return out + rendered + chunk;
  });
}

export class Raw {
  constructor(public text: string) {}
}

export const raw = (text: string) => new Raw(text);

export function errorBanner(code: string, message: string): string {
  return html`<div class="banner banner-error" data-error-code="${code}">
    <strong>${code}</strong> ${message}
  </div>`;
}

export function infoBanner(message: string): string {
  return html`<div class="banner banner-info">${message}</div>`;
}
